//! Dynamic analysis: depth-first ripping of a running app into an
//! event-flow graph.
//!
//! The ripper only talks to a [`Device`] (launch, observe, perform), so the
//! simulator can be swapped for a real device adapter. Backtracking is done
//! by relaunching the app and replaying the discovery path of the state to
//! resume from.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_sim::{
    self, Action, ActivityId, AppBundle, Bounds, BundleError, ComponentId, Fingerprint,
    ScreenObservation, SimError, SimState, StepOutcome, Termination,
};
use crate::primer::possible_actions_for;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid bundle: {0}")]
    BundleInvalid(#[from] BundleError),
    #[error("replay diverged at step {step_index}: {reason}")]
    ReplayDiverged { step_index: usize, reason: String },
    #[error("states {first} and {second} share short id {short_id}")]
    ShortIdCollision {
        short_id: String,
        first: String,
        second: String,
    },
    #[error("device error: {0}")]
    Device(#[from] SimError),
}

/// Result of performing one action on a device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeviceOutcome {
    Running,
    Crashed(String),
    Exited,
}

/// The observation/action surface the ripper needs from a device.
pub trait Device {
    /// (Re)starts the app in its launch state.
    fn launch(&mut self);
    fn observe(&self) -> Result<ScreenObservation, SimError>;
    /// Identity of the current (running) state.
    fn fingerprint(&self) -> Fingerprint;
    fn perform(&mut self, component: &str, action: Action) -> Result<DeviceOutcome, SimError>;
}

/// [`Device`] backed by the bundle simulator.
#[derive(Debug, Clone)]
pub struct SimDevice<'a> {
    bundle: &'a AppBundle,
    state: SimState,
}

impl<'a> SimDevice<'a> {
    pub fn new(bundle: &'a AppBundle) -> Self {
        Self {
            bundle,
            state: app_sim::launch(bundle),
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }
}

impl Device for SimDevice<'_> {
    fn launch(&mut self) {
        self.state = app_sim::launch(self.bundle);
    }

    fn observe(&self) -> Result<ScreenObservation, SimError> {
        app_sim::observe(self.bundle, &self.state)
    }

    fn fingerprint(&self) -> Fingerprint {
        app_sim::fingerprint(self.bundle, &self.state)
    }

    fn perform(&mut self, component: &str, action: Action) -> Result<DeviceOutcome, SimError> {
        let outcome = app_sim::apply_action(self.bundle, &self.state, component, action)?;
        let result = match &outcome {
            StepOutcome::NewState(_) | StepOutcome::NoOp(_) => DeviceOutcome::Running,
            StepOutcome::Crashed(m) => DeviceOutcome::Crashed(m.clone()),
            StepOutcome::Exited => DeviceOutcome::Exited,
        };
        self.state = outcome.into_state(&self.state);
        Ok(result)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RipConfig {
    /// Maximum number of states to expand.
    pub max_states: usize,
    /// States discovered at this depth are recorded but not expanded.
    pub max_depth: usize,
}

impl Default for RipConfig {
    fn default() -> Self {
        Self {
            max_states: 10_000,
            max_depth: 50,
        }
    }
}

/// An edge target: a running state or one of the terminal pseudo-states.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    State(Fingerprint),
    Crashed { message: String },
    Exited,
}

impl Target {
    pub fn state(&self) -> Option<&Fingerprint> {
        match self {
            Target::State(fp) => Some(fp),
            _ => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, Target::State(_))
    }

    pub fn label(&self) -> String {
        match self {
            Target::State(fp) => fp.short_id.clone(),
            Target::Crashed { message } => format!("CRASHED({message})"),
            Target::Exited => "EXITED".to_owned(),
        }
    }

    /// Where a simulator state sits in the graph's vocabulary.
    pub fn of_sim_state(bundle: &AppBundle, state: &SimState) -> Self {
        match &state.terminated {
            Termination::Running => Target::State(app_sim::fingerprint(bundle, state)),
            Termination::Crashed(message) => Target::Crashed {
                message: message.clone(),
            },
            Termination::Exited => Target::Exited,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicRecord {
    pub activity: ActivityId,
    pub component: ComponentId,
    pub effective_text: String,
    pub bounds: Bounds,
    /// Db-relative path of the full-screen capture.
    pub full_screenshot: String,
    /// Db-relative path of the capture with the component highlighted.
    pub contextual_screenshot: String,
    pub state: Fingerprint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub source: Fingerprint,
    pub component: ComponentId,
    pub action: Action,
    pub target: Target,
    pub record: DynamicRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub component: ComponentId,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFlowGraph {
    /// In discovery order; the first entry is the launch state.
    pub states: Vec<Fingerprint>,
    pub launch_state: Fingerprint,
    /// In execution order.
    pub edges: Vec<Edge>,
    /// First-discovery action sequence from launch for every state.
    pub discovery_paths: BTreeMap<Fingerprint, Vec<PathStep>>,
    pub truncated: bool,
    /// States that were recorded but not expanded because of the bounds.
    pub frontier: Vec<Fingerprint>,
}

impl EventFlowGraph {
    pub fn edges_from<'g, 's>(
        &'g self,
        source: &'s Fingerprint,
    ) -> impl Iterator<Item = &'g Edge> + 's
    where
        'g: 's,
    {
        self.edges.iter().filter(move |e| &e.source == source)
    }

    pub fn edge(&self, source: &Fingerprint, component: &str, action: Action) -> Option<&Edge> {
        self.edges
            .iter()
            .filter(|e| &e.source == source)
            .find(|e| e.component.as_str() == component && e.action == action)
    }

    pub fn state_by_id(&self, id: &str) -> Option<&Fingerprint> {
        self.states
            .iter()
            .find(|s| s.short_id == id || s.canonical == id)
    }

    /// Checks the structural invariants every graph produced by [`rip`] holds.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut by_short: HashMap<&str, &Fingerprint> = HashMap::new();
        for s in &self.states {
            if !s.is_consistent() {
                return Err(format!("state {} has inconsistent short id", s.short_id));
            }
            if let Some(prev) = by_short.insert(&s.short_id, s) {
                let kind = if prev == s {
                    "duplicate state"
                } else {
                    "short id collision"
                };
                return Err(format!("{kind} {}", s.short_id));
            }
        }
        let known = |fp: &Fingerprint| by_short.get(fp.short_id.as_str()).is_some_and(|s| *s == fp);
        if !known(&self.launch_state) {
            return Err("launch state missing from states".into());
        }
        let mut seen = std::collections::HashSet::new();
        let mut targeted = std::collections::HashSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            if !known(&e.source) {
                return Err(format!("edge {i}: unknown source {}", e.source.short_id));
            }
            if !seen.insert((&e.source, &e.component, e.action)) {
                return Err(format!(
                    "edge {i}: duplicate edge for ({}, {}, {})",
                    e.source.short_id, e.component, e.action
                ));
            }
            if let Target::State(t) = &e.target {
                if !known(t) {
                    return Err(format!("edge {i}: unknown target {}", t.short_id));
                }
                targeted.insert(t);
            }
            if e.record.state != e.source || e.record.component != e.component {
                return Err(format!("edge {i}: record does not describe its edge"));
            }
            if e.record.activity.as_str() != e.source.activity() {
                return Err(format!("edge {i}: record activity mismatch"));
            }
        }
        for s in &self.states {
            if s != &self.launch_state && !targeted.contains(s) {
                return Err(format!("state {} is not reachable by any edge", s.short_id));
            }
            if !self.discovery_paths.contains_key(s) {
                return Err(format!("state {} has no discovery path", s.short_id));
            }
        }
        if self.discovery_paths.len() != self.states.len() {
            return Err("discovery paths reference unknown states".into());
        }
        for f in &self.frontier {
            if !known(f) {
                return Err(format!("frontier state {} is unknown", f.short_id));
            }
        }
        if self.frontier.is_empty() == self.truncated {
            return Err("truncated flag disagrees with frontier".into());
        }
        Ok(())
    }
}

/// Output of a rip: the graph plus the observed screen of every expanded
/// state (needed to render screenshots).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RipOutput {
    pub graph: EventFlowGraph,
    pub screens: BTreeMap<Fingerprint, ScreenObservation>,
}

pub fn full_screenshot_ref(state: &Fingerprint) -> String {
    format!("shots/{}_full.ppm", state.short_id)
}

pub fn contextual_screenshot_ref(state: &Fingerprint, component: &ComponentId) -> String {
    format!("shots/{}_{}.ppm", state.short_id, component)
}

/// Actionable widgets paired with each of their possible actions, sorted by
/// component id then action name.
pub fn enumerate_actions(observation: &ScreenObservation) -> Vec<(ComponentId, Action)> {
    let mut out: Vec<(ComponentId, Action)> = observation
        .widgets
        .iter()
        .filter(|w| w.actionable())
        .flat_map(|w| {
            possible_actions_for(w.ctype)
                .iter()
                .map(move |a| (w.component.clone(), *a))
        })
        .collect();
    out.sort_by(|(c1, a1), (c2, a2)| (c1, a1.as_str()).cmp(&(c2, a2.as_str())));
    out
}

pub fn rip(bundle: &AppBundle, config: RipConfig) -> Result<RipOutput, EngineError> {
    app_sim::validate(bundle)?;
    rip_device(&mut SimDevice::new(bundle), config)
}

struct Frame {
    state: Fingerprint,
    actions: Vec<(ComponentId, Action)>,
    next: usize,
}

struct Ripper<'d, D: Device> {
    device: &'d mut D,
    config: RipConfig,
    at: Option<Fingerprint>,
    states: Vec<Fingerprint>,
    short_ids: HashMap<String, Fingerprint>,
    depth: HashMap<Fingerprint, usize>,
    paths: BTreeMap<Fingerprint, Vec<PathStep>>,
    screens: BTreeMap<Fingerprint, ScreenObservation>,
    frontier: Vec<Fingerprint>,
    expanded: usize,
    stack: Vec<Frame>,
}

impl<D: Device> Ripper<'_, D> {
    fn admit(
        &mut self,
        fp: &Fingerprint,
        path: Vec<PathStep>,
        depth: usize,
    ) -> Result<(), EngineError> {
        if let Some(other) = self.short_ids.get(&fp.short_id) {
            return Err(EngineError::ShortIdCollision {
                short_id: fp.short_id.clone(),
                first: other.canonical.clone(),
                second: fp.canonical.clone(),
            });
        }
        self.short_ids.insert(fp.short_id.clone(), fp.clone());
        self.states.push(fp.clone());
        self.depth.insert(fp.clone(), depth);
        self.paths.insert(fp.clone(), path);
        Ok(())
    }

    /// Expands `fp` (the device's current state) unless a bound is hit.
    fn expand(&mut self, fp: Fingerprint) -> Result<(), EngineError> {
        if self.expanded >= self.config.max_states || self.depth[&fp] >= self.config.max_depth {
            self.frontier.push(fp);
            return Ok(());
        }
        self.expanded += 1;
        let observation = self.device.observe()?;
        let actions = enumerate_actions(&observation);
        self.screens.insert(fp.clone(), observation);
        self.stack.push(Frame {
            state: fp,
            actions,
            next: 0,
        });
        Ok(())
    }

    fn go_to(&mut self, fp: &Fingerprint) -> Result<(), EngineError> {
        if self.at.as_ref() == Some(fp) {
            return Ok(());
        }
        self.device.launch();
        for (i, step) in self.paths[fp].iter().enumerate() {
            let diverged = |reason: String| EngineError::ReplayDiverged {
                step_index: i + 1,
                reason,
            };
            match self.device.perform(step.component.as_str(), step.action) {
                Ok(DeviceOutcome::Running) => {}
                Ok(other) => return Err(diverged(format!("app terminated: {other:?}"))),
                Err(e) => return Err(diverged(e.to_string())),
            }
        }
        let reached = self.device.fingerprint();
        if &reached != fp {
            return Err(EngineError::ReplayDiverged {
                step_index: self.paths[fp].len(),
                reason: format!("reached {} instead of {}", reached.short_id, fp.short_id),
            });
        }
        self.at = Some(reached);
        Ok(())
    }
}

pub fn rip_device<D: Device>(device: &mut D, config: RipConfig) -> Result<RipOutput, EngineError> {
    device.launch();
    let launch_state = device.fingerprint();
    let mut r = Ripper {
        device,
        config,
        at: Some(launch_state.clone()),
        states: Vec::new(),
        short_ids: HashMap::new(),
        depth: HashMap::new(),
        paths: BTreeMap::new(),
        screens: BTreeMap::new(),
        frontier: Vec::new(),
        expanded: 0,
        stack: Vec::new(),
    };
    r.admit(&launch_state, Vec::new(), 0)?;
    r.expand(launch_state.clone())?;

    let mut edges = Vec::new();
    while let Some(frame) = r.stack.last_mut() {
        let Some((component, action)) = frame.actions.get(frame.next).cloned() else {
            r.stack.pop();
            continue;
        };
        frame.next += 1;
        let source = frame.state.clone();

        r.go_to(&source)?;
        let observation = r.device.observe()?;
        let widget = observation
            .widget(component.as_str())
            .expect("enumerated action targets an observed widget");
        let record = DynamicRecord {
            activity: observation.activity.clone(),
            component: component.clone(),
            effective_text: widget.text.clone(),
            bounds: widget.bounds,
            full_screenshot: full_screenshot_ref(&source),
            contextual_screenshot: contextual_screenshot_ref(&source, &component),
            state: source.clone(),
        };

        let target = match r.device.perform(component.as_str(), action)? {
            DeviceOutcome::Running => {
                let fp = r.device.fingerprint();
                r.at = Some(fp.clone());
                Target::State(fp)
            }
            DeviceOutcome::Crashed(message) => {
                r.at = None;
                Target::Crashed { message }
            }
            DeviceOutcome::Exited => {
                r.at = None;
                Target::Exited
            }
        };
        edges.push(Edge {
            source: source.clone(),
            component: component.clone(),
            action,
            target: target.clone(),
            record,
        });

        if let Target::State(next) = target {
            if !r.depth.contains_key(&next) {
                let mut path = r.paths[&source].clone();
                path.push(PathStep { component, action });
                let depth = r.depth[&source] + 1;
                r.admit(&next, path, depth)?;
                r.expand(next)?;
            }
        }
    }

    let truncated = !r.frontier.is_empty();
    Ok(RipOutput {
        graph: EventFlowGraph {
            states: r.states,
            launch_state,
            edges,
            discovery_paths: r.paths,
            truncated,
            frontier: r.frontier,
        },
        screens: r.screens,
    })
}

/// Relaunches the app and applies `path` step by step.
pub fn replay_path(bundle: &AppBundle, path: &[PathStep]) -> Result<SimState, EngineError> {
    let mut state = app_sim::launch(bundle);
    for (i, step) in path.iter().enumerate() {
        let diverged = |reason: String| EngineError::ReplayDiverged {
            step_index: i + 1,
            reason,
        };
        if !state.is_running() {
            return Err(diverged("app already terminated".into()));
        }
        let outcome = app_sim::apply_action(bundle, &state, step.component.as_str(), step.action)
            .map_err(|e| diverged(e.to_string()))?;
        state = outcome.into_state(&state);
    }
    Ok(state)
}
