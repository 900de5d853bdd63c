//! Brute-force breadth-first enumeration of an app's reachable state space.
//!
//! Deliberately shares nothing with the simulator, fingerprinting or ripper
//! code paths: it interprets bundle effects on a flat table of effective
//! component properties and formats canonical strings itself.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use guirepro_core::app_sim::{AppBundle, ComponentType, Effect};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OTarget {
    State(String),
    Crashed(String),
    Exited,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct OState {
    activity: String,
    // (activity, component) -> (visible, enabled, text)
    props: BTreeMap<(String, String), (bool, bool, String)>,
}

impl OState {
    fn canonical(&self) -> String {
        let mut s = format!("activity={};", self.activity);
        for ((a, c), (v, e, t)) in &self.props {
            let mut esc = String::new();
            for ch in t.chars() {
                match ch {
                    ';' => esc += "\\;",
                    ',' => esc += "\\,",
                    '\\' => esc += "\\\\",
                    '\n' => esc += "\\n",
                    other => esc.push(other),
                }
            }
            s += &format!("{a}.{c}:v={},e={},t={esc};", *v as u8, *e as u8);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct OracleGraph {
    pub launch: String,
    pub states: BTreeSet<String>,
    /// (source canonical, component id, target)
    pub edges: BTreeSet<(String, String, OTarget)>,
    /// A shortest component path from launch to every reachable state and
    /// terminal outcome.
    pub shortest: BTreeMap<OTarget, Vec<String>>,
}

/// All supported action names for a type; every type is tappable only.
fn actions(_t: ComponentType) -> &'static [&'static str] {
    &["tap"]
}

enum Step {
    Running(OState),
    Crashed(String),
    Exited,
}

fn step(bundle: &AppBundle, s: &OState, component: &str) -> Step {
    let handler = bundle.handlers.iter().find(|h| {
        h.trigger.activity.as_str() == s.activity && h.trigger.component.as_str() == component
    });
    let mut next = s.clone();
    let Some(h) = handler else {
        return Step::Running(next);
    };
    for e in &h.effects {
        match &e.effect {
            Effect::Navigate(a) => next.activity = a.to_string(),
            Effect::SetVisible(r, v) => {
                next.props
                    .get_mut(&(r.activity.to_string(), r.component.to_string()))
                    .unwrap()
                    .0 = *v
            }
            Effect::SetEnabled(r, v) => {
                next.props
                    .get_mut(&(r.activity.to_string(), r.component.to_string()))
                    .unwrap()
                    .1 = *v
            }
            Effect::SetText(r, t) => {
                next.props
                    .get_mut(&(r.activity.to_string(), r.component.to_string()))
                    .unwrap()
                    .2 = t.clone()
            }
            Effect::Crash(m) => return Step::Crashed(m.clone()),
            Effect::Exit => return Step::Exited,
        }
    }
    Step::Running(next)
}

pub fn enumerate(bundle: &AppBundle) -> OracleGraph {
    let mut props = BTreeMap::new();
    for a in &bundle.activities {
        for c in &a.components {
            props.insert(
                (a.id.to_string(), c.id.to_string()),
                (c.initial_visible, c.initial_enabled, c.text.clone()),
            );
        }
    }
    let start = OState {
        activity: bundle.launch_activity.to_string(),
        props,
    };
    let launch = start.canonical();

    let mut states = BTreeSet::from([launch.clone()]);
    let mut edges = BTreeSet::new();
    let mut shortest: BTreeMap<OTarget, Vec<String>> =
        BTreeMap::from([(OTarget::State(launch.clone()), vec![])]);
    let mut queue = VecDeque::from([start]);

    while let Some(s) = queue.pop_front() {
        let here = s.canonical();
        let path = shortest[&OTarget::State(here.clone())].clone();
        let mut tappable: Vec<(String, ComponentType)> = s
            .props
            .iter()
            .filter(|((a, _), (v, e, _))| *a == s.activity && *v && *e)
            .map(|((a, c), _)| {
                let t = bundle
                    .activities
                    .iter()
                    .find(|x| x.id.as_str() == a)
                    .unwrap()
                    .components
                    .iter()
                    .find(|x| x.id.as_str() == c)
                    .unwrap()
                    .ctype;
                (c.clone(), t)
            })
            .collect();
        tappable.sort();
        for (c, t) in tappable {
            for _action in actions(t) {
                let target = match step(bundle, &s, &c) {
                    Step::Running(n) => {
                        let canon = n.canonical();
                        if states.insert(canon.clone()) {
                            queue.push_back(n);
                        }
                        OTarget::State(canon)
                    }
                    Step::Crashed(m) => OTarget::Crashed(m),
                    Step::Exited => OTarget::Exited,
                };
                shortest.entry(target.clone()).or_insert_with(|| {
                    let mut p = path.clone();
                    p.push(c.clone());
                    p
                });
                edges.insert((here.clone(), c.clone(), target));
            }
        }
    }

    OracleGraph {
        launch,
        states,
        edges,
        shortest,
    }
}
