//! On-disk analysis database: canonical JSON plus PPM screenshots.
//!
//! ```text
//! <db>/meta.json
//! <db>/universe.json
//! <db>/graph.json      states, edges (record indices), discovery paths
//! <db>/records.json    one dynamic record per edge, in edge order
//! <db>/shots/<short_id>_full.ppm
//! <db>/shots/<short_id>_<component>.ppm
//! ```
//!
//! JSON objects are written with sorted keys, two-space indentation and a
//! trailing newline so identical inputs give identical bytes.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_sim::{self, Action, ComponentId, Fingerprint, ScreenObservation};
use crate::engine::{
    contextual_screenshot_ref, full_screenshot_ref, DynamicRecord, Edge, EventFlowGraph, PathStep,
    RipOutput, Target,
};
use crate::par::Execution;
use crate::primer::{StaticComponentRecord, StaticUniverse};

pub const META_FILE: &str = "meta.json";
pub const UNIVERSE_FILE: &str = "universe.json";
pub const GRAPH_FILE: &str = "graph.json";
pub const RECORDS_FILE: &str = "records.json";
pub const SHOTS_DIR: &str = "shots";

#[derive(Debug, Error)]
pub enum DbError {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {detail}")]
    Schema { file: String, detail: String },
    #[error("referential integrity: {0}")]
    RefIntegrity(String),
    #[error("unknown component {activity}.{component}")]
    UnknownComponent { activity: String, component: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DbError + '_ {
    move |source| DbError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbMeta {
    pub app_id: String,
    pub version: String,
    pub created_utc: String,
    pub truncated: bool,
    pub tool_version: String,
}

impl DbMeta {
    pub fn new(
        universe: &StaticUniverse,
        graph: &EventFlowGraph,
        created_utc: impl Into<String>,
    ) -> Self {
        Self {
            app_id: universe.app_id.clone(),
            version: universe.version.clone(),
            created_utc: created_utc.into(),
            truncated: graph.truncated,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}

/// A loaded, validated database. Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDb {
    pub root: PathBuf,
    pub meta: DbMeta,
    pub universe: StaticUniverse,
    pub graph: EventFlowGraph,
}

impl ModelDb {
    pub fn records(&self) -> impl Iterator<Item = &DynamicRecord> {
        self.graph.edges.iter().map(|e| &e.record)
    }

    pub fn shots_dir(&self) -> PathBuf {
        self.root.join(SHOTS_DIR)
    }

    /// Absolute path of a db-relative screenshot ref, if the ref is one the
    /// db actually stores.
    pub fn screenshot_path(&self, reference: &str) -> Option<PathBuf> {
        let known = self
            .records()
            .any(|r| r.full_screenshot == reference || r.contextual_screenshot == reference)
            || self
                .graph
                .states
                .iter()
                .any(|s| full_screenshot_ref(s) == reference);
        known.then(|| self.root.join(reference))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedComponentView {
    pub static_record: StaticComponentRecord,
    /// Sorted by state canonical string.
    pub dynamic: Vec<DynamicRecord>,
}

pub fn query_component(
    db: &ModelDb,
    activity: &str,
    component: &str,
) -> Result<MergedComponentView, DbError> {
    let static_record = db
        .universe
        .get(activity, component)
        .cloned()
        .ok_or_else(|| DbError::UnknownComponent {
            activity: activity.to_owned(),
            component: component.to_owned(),
        })?;
    let mut dynamic: Vec<DynamicRecord> = db
        .records()
        .filter(|r| r.activity.as_str() == activity && r.component.as_str() == component)
        .cloned()
        .collect();
    dynamic.sort_by(|a, b| a.state.canonical.cmp(&b.state.canonical));
    Ok(MergedComponentView {
        static_record,
        dynamic,
    })
}

// ---- serialized forms -------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    launch_state: String,
    states: Vec<Fingerprint>,
    edges: Vec<EdgeEntry>,
    discovery_paths: BTreeMap<String, Vec<PathStep>>,
    truncated: bool,
    frontier: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    source: String,
    component: ComponentId,
    action: Action,
    target: TargetEntry,
    record: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TargetEntry {
    State { state: String },
    Crashed { message: String },
    Exited,
}

/// Serializes `value` as pretty JSON with sorted object keys and a trailing
/// newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    let value = sort_keys(serde_json::to_value(value).expect("in-memory types serialize"));
    let mut out = serde_json::to_vec_pretty(&value).expect("values serialize");
    out.push(b'\n');
    out
}

// Explicit so the output stays sorted even if serde_json's `preserve_order`
// feature gets unified in.
fn sort_keys(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(
                entries
                    .into_iter()
                    .map(|(k, v)| (k, sort_keys(v)))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

struct ShotSpec<'a> {
    reference: String,
    observation: &'a ScreenObservation,
    highlight: Option<&'a ComponentId>,
}

fn plan_shots(rip: &RipOutput) -> Result<Vec<ShotSpec<'_>>, DbError> {
    let mut shots: BTreeMap<String, ShotSpec<'_>> = BTreeMap::new();
    for (state, observation) in &rip.screens {
        let reference = full_screenshot_ref(state);
        shots.insert(
            reference.clone(),
            ShotSpec {
                reference,
                observation,
                highlight: None,
            },
        );
    }
    for edge in &rip.graph.edges {
        let r = &edge.record;
        let observation = rip.screens.get(&edge.source).ok_or_else(|| {
            DbError::RefIntegrity(format!(
                "{} has no stored screen for state {}",
                r.full_screenshot, edge.source.short_id
            ))
        })?;
        if r.full_screenshot != full_screenshot_ref(&edge.source)
            || r.contextual_screenshot != contextual_screenshot_ref(&edge.source, &edge.component)
        {
            return Err(DbError::RefIntegrity(format!(
                "record for {} on {} has non-canonical screenshot refs",
                edge.component, edge.source.short_id
            )));
        }
        shots
            .entry(r.contextual_screenshot.clone())
            .or_insert_with(|| ShotSpec {
                reference: r.contextual_screenshot.clone(),
                observation,
                highlight: Some(&edge.component),
            });
    }
    Ok(shots.into_values().collect())
}

pub fn save(
    db_dir: impl AsRef<Path>,
    universe: &StaticUniverse,
    rip: &RipOutput,
    meta: &DbMeta,
) -> Result<(), DbError> {
    save_with(db_dir, universe, rip, meta, Execution::default())
}

pub fn save_with(
    db_dir: impl AsRef<Path>,
    universe: &StaticUniverse,
    rip: &RipOutput,
    meta: &DbMeta,
    exec: Execution,
) -> Result<(), DbError> {
    let root = db_dir.as_ref();
    let shots = plan_shots(rip)?;
    let graph = &rip.graph;

    let shots_dir = root.join(SHOTS_DIR);
    fs::create_dir_all(&shots_dir).map_err(io_err(&shots_dir))?;
    for entry in fs::read_dir(&shots_dir).map_err(io_err(&shots_dir))? {
        let path = entry.map_err(io_err(&shots_dir))?.path();
        if path.extension().is_some_and(|e| e == "ppm") {
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }

    let records: Vec<&DynamicRecord> = graph.edges.iter().map(|e| &e.record).collect();
    let graph_file = GraphFile {
        launch_state: graph.launch_state.short_id.clone(),
        states: graph.states.clone(),
        edges: graph
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| EdgeEntry {
                source: e.source.short_id.clone(),
                component: e.component.clone(),
                action: e.action,
                target: match &e.target {
                    Target::State(fp) => TargetEntry::State {
                        state: fp.short_id.clone(),
                    },
                    Target::Crashed { message } => TargetEntry::Crashed {
                        message: message.clone(),
                    },
                    Target::Exited => TargetEntry::Exited,
                },
                record: i,
            })
            .collect(),
        discovery_paths: graph
            .discovery_paths
            .iter()
            .map(|(fp, p)| (fp.short_id.clone(), p.clone()))
            .collect(),
        truncated: graph.truncated,
        frontier: graph.frontier.iter().map(|f| f.short_id.clone()).collect(),
    };

    for (name, bytes) in [
        (META_FILE, to_canonical_json(meta)),
        (UNIVERSE_FILE, to_canonical_json(universe)),
        (GRAPH_FILE, to_canonical_json(&graph_file)),
        (RECORDS_FILE, to_canonical_json(&records)),
    ] {
        let path = root.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }

    exec.try_map(&shots, |shot| {
        let image = app_sim::render_screenshot_with(
            shot.observation,
            shot.highlight.map(ComponentId::as_str),
            Execution::Sequential,
        )
        .map_err(|e| DbError::RefIntegrity(format!("{}: {e}", shot.reference)))?;
        let path = root.join(&shot.reference);
        fs::write(&path, image.to_ppm_with(Execution::Sequential)).map_err(io_err(&path))
    })?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(root: &Path, name: &str) -> Result<T, DbError> {
    let path = root.join(name);
    let text = fs::read_to_string(&path).map_err(|e| DbError::Schema {
        file: name.to_owned(),
        detail: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| DbError::Schema {
        file: name.to_owned(),
        detail: e.to_string(),
    })
}

pub fn load(db_dir: impl AsRef<Path>) -> Result<ModelDb, DbError> {
    let root = db_dir.as_ref();
    let meta: DbMeta = read_json(root, META_FILE)?;
    let universe: StaticUniverse = read_json(root, UNIVERSE_FILE)?;
    let graph_file: GraphFile = read_json(root, GRAPH_FILE)?;
    let records: Vec<DynamicRecord> = read_json(root, RECORDS_FILE)?;

    let schema = |file: &str, detail: String| DbError::Schema {
        file: file.to_owned(),
        detail,
    };
    let by_id: HashMap<&str, &Fingerprint> = graph_file
        .states
        .iter()
        .map(|s| (s.short_id.as_str(), s))
        .collect();
    let lookup = |id: &str| {
        by_id
            .get(id)
            .map(|fp| (*fp).clone())
            .ok_or_else(|| schema(GRAPH_FILE, format!("unknown state id `{id}`")))
    };

    let mut edges = Vec::with_capacity(graph_file.edges.len());
    for (i, e) in graph_file.edges.iter().enumerate() {
        let record = records.get(e.record).cloned().ok_or_else(|| {
            schema(
                GRAPH_FILE,
                format!("edge {i} references missing record {}", e.record),
            )
        })?;
        edges.push(Edge {
            source: lookup(&e.source)?,
            component: e.component.clone(),
            action: e.action,
            target: match &e.target {
                TargetEntry::State { state } => Target::State(lookup(state)?),
                TargetEntry::Crashed { message } => Target::Crashed {
                    message: message.clone(),
                },
                TargetEntry::Exited => Target::Exited,
            },
            record,
        });
    }
    if records.len() != edges.len() {
        return Err(schema(
            RECORDS_FILE,
            format!("{} records for {} edges", records.len(), edges.len()),
        ));
    }

    let mut discovery_paths = BTreeMap::new();
    for (id, path) in graph_file.discovery_paths {
        discovery_paths.insert(lookup(&id)?, path);
    }
    let graph = EventFlowGraph {
        launch_state: lookup(&graph_file.launch_state)?,
        states: graph_file.states.clone(),
        edges,
        discovery_paths,
        truncated: graph_file.truncated,
        frontier: graph_file
            .frontier
            .iter()
            .map(|id| lookup(id))
            .collect::<Result<_, _>>()?,
    };
    graph
        .check_invariants()
        .map_err(|detail| schema(GRAPH_FILE, detail))?;

    if meta.app_id != universe.app_id || meta.version != universe.version {
        return Err(DbError::RefIntegrity(
            "meta and universe disagree on app identity".into(),
        ));
    }
    if meta.truncated != graph.truncated {
        return Err(schema(
            META_FILE,
            "truncated flag disagrees with graph".into(),
        ));
    }
    for w in universe.records.windows(2) {
        if (&w[0].activity, &w[0].component) >= (&w[1].activity, &w[1].component) {
            return Err(schema(
                UNIVERSE_FILE,
                "records not sorted and unique".into(),
            ));
        }
    }

    for (i, r) in records.iter().enumerate() {
        if !universe.contains(r.activity.as_str(), r.component.as_str()) {
            return Err(DbError::RefIntegrity(format!(
                "record {i} names {}.{} which is not in the static universe",
                r.activity, r.component
            )));
        }
        for shot in [&r.full_screenshot, &r.contextual_screenshot] {
            let path = root.join(shot);
            if !shot.starts_with("shots/") || shot.contains("..") || !path.is_file() {
                return Err(DbError::RefIntegrity(format!(
                    "record {i} references missing screenshot {shot}"
                )));
            }
        }
    }

    Ok(ModelDb {
        root: root.to_path_buf(),
        meta,
        universe,
        graph,
    })
}
