//! Step auto-completion for bug reports.
//!
//! A [`ReportSession`] walks a path through the app's event-flow graph. The
//! estimate is the set of states the app may be in after the confirmed
//! steps; suggestions are the outgoing edges of those states, and the
//! reporter confirms one by picking the contextual screenshot (variant) that
//! matches what they saw.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_sim::{Action, ActivityId, ComponentId, Fingerprint};
use crate::engine::Target;
use crate::model_db::ModelDb;
use crate::report::{AugmentedStep, BugReport, Traceability};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutocompleteError {
    #[error("the app model has no states")]
    EmptyModel,
    #[error("{action} on `{component}` is not among the current suggestions")]
    NotSuggested { component: String, action: Action },
    #[error("`{source_state}` is not a variant of {action} on `{component}`")]
    UnknownVariant {
        component: String,
        action: Action,
        source_state: String,
    },
    #[error("unknown component {activity}.{component}")]
    UnknownComponent { activity: String, component: String },
    #[error("{action} is not a possible action on {activity}.{component}")]
    UnsupportedAction {
        activity: String,
        component: String,
        action: Action,
    },
    #[error("session has no steps")]
    EmptySession,
    #[error("cannot finalize a report without steps")]
    NoSteps,
    #[error("report title must not be empty")]
    EmptyTitle,
    #[error("session is closed")]
    SessionClosed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub source_state: Fingerprint,
    pub target: Target,
    pub contextual_screenshot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub component: ComponentId,
    pub activity: ActivityId,
    pub action: Action,
    /// One per candidate source state, ordered by its canonical string.
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmedStep {
    pub index: usize,
    pub component: ComponentId,
    pub activity: ActivityId,
    pub action: Action,
    /// Absent for static-fallback steps.
    pub chosen_variant: Option<Variant>,
    pub traceability: Traceability,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSession {
    session_id: String,
    db: Arc<ModelDb>,
    assume_launch: bool,
    steps: Vec<ConfirmedStep>,
    estimate: BTreeSet<Target>,
    degraded: bool,
    closed: bool,
}

impl ReportSession {
    /// Opens a session with a random id.
    pub fn open(db: Arc<ModelDb>, assume_launch: bool) -> Result<Self, AutocompleteError> {
        Self::open_with_id(db, assume_launch, uuid::Uuid::new_v4().simple().to_string())
    }

    pub fn open_with_id(
        db: Arc<ModelDb>,
        assume_launch: bool,
        session_id: impl Into<String>,
    ) -> Result<Self, AutocompleteError> {
        if db.graph.states.is_empty() {
            return Err(AutocompleteError::EmptyModel);
        }
        let mut session = Self {
            session_id: session_id.into(),
            db,
            assume_launch,
            steps: Vec::new(),
            estimate: BTreeSet::new(),
            degraded: false,
            closed: false,
        };
        session.estimate = session.initial_estimate();
        Ok(session)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn db(&self) -> &ModelDb {
        &self.db
    }

    pub fn steps(&self) -> &[ConfirmedStep] {
        &self.steps
    }

    pub fn estimate(&self) -> &BTreeSet<Target> {
        &self.estimate
    }

    pub fn degraded(&self) -> bool {
        self.degraded
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn all_states(&self) -> BTreeSet<Target> {
        self.db
            .graph
            .states
            .iter()
            .cloned()
            .map(Target::State)
            .collect()
    }

    fn initial_estimate(&self) -> BTreeSet<Target> {
        if self.assume_launch {
            BTreeSet::from([Target::State(self.db.graph.launch_state.clone())])
        } else {
            self.all_states()
        }
    }

    /// Recomputes `(estimate, degraded)` by folding the steps over the
    /// initial estimate.
    fn fold(&self, steps: &[ConfirmedStep]) -> (BTreeSet<Target>, bool) {
        steps.iter().fold(
            (self.initial_estimate(), false),
            |(_, degraded), step| match &step.chosen_variant {
                Some(v) => (BTreeSet::from([v.target.clone()]), degraded),
                None => (self.all_states(), true),
            },
        )
    }

    fn ensure_open(&self) -> Result<(), AutocompleteError> {
        if self.closed {
            Err(AutocompleteError::SessionClosed)
        } else {
            Ok(())
        }
    }

    pub fn suggestions(&self) -> Vec<Suggestion> {
        // (component, action, activity) -> (action, variants keyed by source canonical)
        type Groups<'a> =
            BTreeMap<(ComponentId, &'static str, ActivityId), (Action, BTreeMap<&'a str, Variant>)>;
        let mut groups: Groups = BTreeMap::new();
        for source in self.estimate.iter().filter_map(Target::state) {
            for edge in self.db.graph.edges_from(source) {
                let (_, variants) = groups
                    .entry((
                        edge.component.clone(),
                        edge.action.as_str(),
                        edge.record.activity.clone(),
                    ))
                    .or_insert_with(|| (edge.action, BTreeMap::new()));
                variants
                    .entry(edge.source.canonical.as_str())
                    .or_insert_with(|| Variant {
                        source_state: edge.source.clone(),
                        target: edge.target.clone(),
                        contextual_screenshot: edge.record.contextual_screenshot.clone(),
                    });
            }
        }
        groups
            .into_iter()
            .map(
                |((component, _, activity), (action, variants))| Suggestion {
                    component,
                    activity,
                    action,
                    variants: variants.into_values().collect(),
                },
            )
            .collect()
    }

    fn traceability(
        &self,
        activity: &str,
        component: &str,
    ) -> Result<(Traceability, crate::app_sim::ComponentType), AutocompleteError> {
        let rec = self.db.universe.get(activity, component).ok_or_else(|| {
            AutocompleteError::UnknownComponent {
                activity: activity.to_owned(),
                component: component.to_owned(),
            }
        })?;
        Ok((
            Traceability {
                layout_source: rec.layout_source.clone(),
                referencing_class_files: rec.referencing_class_files.clone(),
            },
            rec.ctype,
        ))
    }

    /// Confirms a suggested step. `source_state` is the short id or canonical
    /// string of the variant whose screenshot the reporter picked.
    pub fn confirm_step(
        &mut self,
        component: &str,
        action: Action,
        source_state: &str,
    ) -> Result<&mut Self, AutocompleteError> {
        self.ensure_open()?;
        let suggestions = self.suggestions();
        let mut matching = suggestions
            .iter()
            .filter(|s| s.component.as_str() == component && s.action == action)
            .peekable();
        if matching.peek().is_none() {
            return Err(AutocompleteError::NotSuggested {
                component: component.to_owned(),
                action,
            });
        }
        let (suggestion, variant) = matching
            .flat_map(|s| s.variants.iter().map(move |v| (s, v)))
            .find(|(_, v)| {
                v.source_state.short_id == source_state || v.source_state.canonical == source_state
            })
            .ok_or_else(|| AutocompleteError::UnknownVariant {
                component: component.to_owned(),
                action,
                source_state: source_state.to_owned(),
            })?;

        let (traceability, _) = self.traceability(suggestion.activity.as_str(), component)?;
        self.steps.push(ConfirmedStep {
            index: self.steps.len() + 1,
            component: suggestion.component.clone(),
            activity: suggestion.activity.clone(),
            action,
            chosen_variant: Some(variant.clone()),
            traceability,
        });
        self.estimate = BTreeSet::from([variant.target.clone()]);
        Ok(self)
    }

    /// Records a step straight from the static universe when no suggestion
    /// fits. The estimate resets to every known state.
    pub fn fallback_step(
        &mut self,
        activity: &str,
        component: &str,
        action: Action,
    ) -> Result<&mut Self, AutocompleteError> {
        self.ensure_open()?;
        let rec = self.db.universe.get(activity, component).ok_or_else(|| {
            AutocompleteError::UnknownComponent {
                activity: activity.to_owned(),
                component: component.to_owned(),
            }
        })?;
        if !rec.possible_actions.contains(&action) {
            return Err(AutocompleteError::UnsupportedAction {
                activity: activity.to_owned(),
                component: component.to_owned(),
                action,
            });
        }
        let (traceability, _) = self.traceability(activity, component)?;
        self.steps.push(ConfirmedStep {
            index: self.steps.len() + 1,
            component: rec.component.clone(),
            activity: rec.activity.clone(),
            action,
            chosen_variant: None,
            traceability,
        });
        self.estimate = self.all_states();
        self.degraded = true;
        Ok(self)
    }

    pub fn undo_step(&mut self) -> Result<&mut Self, AutocompleteError> {
        self.ensure_open()?;
        if self.steps.pop().is_none() {
            return Err(AutocompleteError::EmptySession);
        }
        (self.estimate, self.degraded) = self.fold(&self.steps);
        Ok(self)
    }

    /// Assembles the final report and closes the session.
    pub fn finalize(
        &mut self,
        title: &str,
        description: &str,
    ) -> Result<BugReport, AutocompleteError> {
        self.ensure_open()?;
        if self.steps.is_empty() {
            return Err(AutocompleteError::NoSteps);
        }
        if title.trim().is_empty() {
            return Err(AutocompleteError::EmptyTitle);
        }

        let mut steps = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            let (_, component_type) =
                self.traceability(s.activity.as_str(), s.component.as_str())?;
            steps.push(AugmentedStep {
                index: s.index,
                action: s.action,
                activity: s.activity.clone(),
                component: s.component.clone(),
                component_type,
                screenshot: s
                    .chosen_variant
                    .as_ref()
                    .map(|v| v.contextual_screenshot.clone()),
                source_state: s.chosen_variant.as_ref().map(|v| v.source_state.clone()),
                target: s.chosen_variant.as_ref().map(|v| v.target.clone()),
                traceability: s.traceability.clone(),
            });
        }
        let expected_outcome = if self.degraded {
            None
        } else {
            debug_assert_eq!(self.estimate.len(), 1);
            self.estimate.iter().next().cloned()
        };

        self.closed = true;
        Ok(BugReport {
            report_id: self.session_id.clone(),
            app_id: self.db.meta.app_id.clone(),
            version: self.db.meta.version.clone(),
            title: title.to_owned(),
            description: description.to_owned(),
            degraded: self.degraded,
            steps,
            expected_outcome,
        })
    }
}
