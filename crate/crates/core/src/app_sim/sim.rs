//! Deterministic execution of an [`AppBundle`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bundle::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("app has terminated")]
    Terminated,
    #[error("illegal target `{component}` on {activity}: {reason}")]
    IllegalTarget {
        activity: ActivityId,
        component: ComponentId,
        reason: &'static str,
    },
}

/// Property overrides relative to a component's declaration.
///
/// Only deviations are stored: an effect that restores the declared value
/// clears the corresponding field, so two states with the same effective
/// properties always compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Override {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visible: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Override {
    fn is_empty(&self) -> bool {
        self.visible.is_none() && self.enabled.is_none() && self.text.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "message", rename_all = "snake_case")]
pub enum Termination {
    Running,
    Crashed(String),
    Exited,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimState {
    pub current_activity: ActivityId,
    pub overrides: BTreeMap<ComponentRef, Override>,
    pub terminated: Termination,
}

impl SimState {
    pub fn is_running(&self) -> bool {
        self.terminated == Termination::Running
    }
}

/// Effective properties of a single on-screen widget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub component: ComponentId,
    pub ctype: ComponentType,
    pub text: String,
    pub visible: bool,
    pub enabled: bool,
    pub bounds: Bounds,
}

impl Widget {
    pub fn actionable(&self) -> bool {
        self.visible && self.enabled
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenObservation {
    pub activity: ActivityId,
    /// Every declared component of the activity, ordered by id.
    pub widgets: Vec<Widget>,
}

impl ScreenObservation {
    pub fn widget(&self, id: &str) -> Option<&Widget> {
        self.widgets.iter().find(|w| w.component.as_str() == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    /// A handler ran and the app is still running.
    NewState(SimState),
    /// No handler matched; the state is unchanged.
    NoOp(SimState),
    Crashed(String),
    Exited,
}

impl StepOutcome {
    /// The simulator state after this outcome, with termination recorded.
    pub fn into_state(self, before: &SimState) -> SimState {
        match self {
            StepOutcome::NewState(s) | StepOutcome::NoOp(s) => s,
            StepOutcome::Crashed(msg) => SimState {
                terminated: Termination::Crashed(msg),
                ..before.clone()
            },
            StepOutcome::Exited => SimState {
                terminated: Termination::Exited,
                ..before.clone()
            },
        }
    }
}

pub fn launch(bundle: &AppBundle) -> SimState {
    SimState {
        current_activity: bundle.launch_activity.clone(),
        overrides: BTreeMap::new(),
        terminated: Termination::Running,
    }
}

pub(crate) fn effective(decl: &ComponentDecl, ov: Option<&Override>) -> (bool, bool, String) {
    let visible = ov.and_then(|o| o.visible).unwrap_or(decl.initial_visible);
    let enabled = ov.and_then(|o| o.enabled).unwrap_or(decl.initial_enabled);
    let text = ov
        .and_then(|o| o.text.clone())
        .unwrap_or_else(|| decl.text.clone());
    (visible, enabled, text)
}

pub fn observe(bundle: &AppBundle, state: &SimState) -> Result<ScreenObservation, SimError> {
    if !state.is_running() {
        return Err(SimError::Terminated);
    }
    let activity = bundle
        .activity(state.current_activity.as_str())
        .expect("state references a declared activity");
    let widgets = activity
        .components
        .iter()
        .map(|decl| {
            let key = ComponentRef::new(activity.id.clone(), decl.id.clone());
            let (visible, enabled, text) = effective(decl, state.overrides.get(&key));
            Widget {
                component: decl.id.clone(),
                ctype: decl.ctype,
                text,
                visible,
                enabled,
                bounds: decl.bounds,
            }
        })
        .collect();
    Ok(ScreenObservation {
        activity: activity.id.clone(),
        widgets,
    })
}

pub fn apply_action(
    bundle: &AppBundle,
    state: &SimState,
    component: &str,
    action: Action,
) -> Result<StepOutcome, SimError> {
    let screen = observe(bundle, state)?;
    let illegal = |reason| SimError::IllegalTarget {
        activity: screen.activity.clone(),
        component: ComponentId::new(component),
        reason,
    };
    let widget = screen.widget(component).ok_or_else(|| illegal("absent"))?;
    if !widget.visible {
        return Err(illegal("not visible"));
    }
    if !widget.enabled {
        return Err(illegal("not enabled"));
    }

    let Some(handler) = bundle.handler(screen.activity.as_str(), component, action) else {
        return Ok(StepOutcome::NoOp(state.clone()));
    };

    let mut next = state.clone();
    for decl in &handler.effects {
        match &decl.effect {
            Effect::Navigate(a) => next.current_activity = a.clone(),
            Effect::SetVisible(r, v) => set_override(bundle, &mut next, r, |o, d| {
                o.visible = (*v != d.initial_visible).then_some(*v);
            }),
            Effect::SetEnabled(r, v) => set_override(bundle, &mut next, r, |o, d| {
                o.enabled = (*v != d.initial_enabled).then_some(*v);
            }),
            Effect::SetText(r, t) => set_override(bundle, &mut next, r, |o, d| {
                o.text = (*t != d.text).then(|| t.clone());
            }),
            Effect::Crash(msg) => return Ok(StepOutcome::Crashed(msg.clone())),
            Effect::Exit => return Ok(StepOutcome::Exited),
        }
    }
    Ok(StepOutcome::NewState(next))
}

fn set_override(
    bundle: &AppBundle,
    state: &mut SimState,
    target: &ComponentRef,
    update: impl FnOnce(&mut Override, &ComponentDecl),
) {
    let decl = bundle
        .component(target)
        .expect("validated bundle resolves effect targets");
    let mut ov = state.overrides.remove(target).unwrap_or_default();
    update(&mut ov, decl);
    if !ov.is_empty() {
        state.overrides.insert(target.clone(), ov);
    }
}
