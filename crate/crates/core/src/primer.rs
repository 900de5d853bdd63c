//! Static analysis: the universe of declared GUI components with their
//! possible actions and links back to layout and logic source lines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::app_sim::{
    Action, ActivityId, AppBundle, ComponentId, ComponentRef, ComponentType, SourceLoc,
};

/// Actions each component type supports. Extend a row to add a gesture.
const ACTION_TABLE: &[(ComponentType, &[Action])] = &[
    (ComponentType::Button, &[Action::Tap]),
    (ComponentType::Checkbox, &[Action::Tap]),
    (ComponentType::Spinner, &[Action::Tap]),
    (ComponentType::TextField, &[Action::Tap]),
    (ComponentType::ListItem, &[Action::Tap]),
    (ComponentType::MenuItem, &[Action::Tap]),
];

pub fn possible_actions_for(ctype: ComponentType) -> &'static [Action] {
    ACTION_TABLE
        .iter()
        .find(|(t, _)| *t == ctype)
        .map(|(_, actions)| *actions)
        .expect("every component type has an action row")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticComponentRecord {
    pub activity: ActivityId,
    pub component: ComponentId,
    pub ctype: ComponentType,
    pub possible_actions: Vec<Action>,
    pub declared_text: String,
    pub layout_source: SourceLoc,
    /// Logic-file lines (handler triggers and effect targets) that mention
    /// the component, sorted and deduplicated.
    pub referencing_class_files: Vec<SourceLoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticUniverse {
    pub app_id: String,
    pub version: String,
    /// Sorted by `(activity, component)`.
    pub records: Vec<StaticComponentRecord>,
}

impl StaticUniverse {
    pub fn get(&self, activity: &str, component: &str) -> Option<&StaticComponentRecord> {
        self.records
            .binary_search_by(|r| {
                (r.activity.as_str(), r.component.as_str()).cmp(&(activity, component))
            })
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn contains(&self, activity: &str, component: &str) -> bool {
        self.get(activity, component).is_some()
    }
}

pub fn build_static_universe(bundle: &AppBundle) -> StaticUniverse {
    let mut refs: BTreeMap<ComponentRef, Vec<SourceLoc>> = BTreeMap::new();
    for handler in &bundle.handlers {
        refs.entry(handler.trigger.clone())
            .or_default()
            .push(handler.source.clone());
        for effect in &handler.effects {
            if let Some(target) = effect.effect.target() {
                refs.entry(target.clone())
                    .or_default()
                    .push(effect.source.clone());
            }
        }
    }

    let mut records = Vec::with_capacity(bundle.component_count());
    for activity in &bundle.activities {
        for decl in &activity.components {
            let key = ComponentRef::new(activity.id.clone(), decl.id.clone());
            let mut locs = refs.remove(&key).unwrap_or_default();
            locs.sort();
            locs.dedup();
            records.push(StaticComponentRecord {
                activity: activity.id.clone(),
                component: decl.id.clone(),
                ctype: decl.ctype,
                possible_actions: possible_actions_for(decl.ctype).to_vec(),
                declared_text: decl.text.clone(),
                layout_source: decl.source.clone(),
                referencing_class_files: locs,
            });
        }
    }

    StaticUniverse {
        app_id: bundle.app_id.clone(),
        version: bundle.version.clone(),
        records,
    }
}
