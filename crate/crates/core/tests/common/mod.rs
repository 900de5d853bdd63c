#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeSet;
use std::path::PathBuf;

use guirepro_core::app_sim::{load_bundle, AppBundle};
use guirepro_core::engine::{EventFlowGraph, Target};

use oracle::OTarget;

pub const CORPORA: [&str; 4] = ["demo-app", "notes-app", "settings-app", "shop-app"];

pub fn corpus_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(name)
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden")
}

pub fn corpus(name: &str) -> AppBundle {
    load_bundle(corpus_dir(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn demo() -> AppBundle {
    corpus("demo-app")
}

pub fn to_otarget(t: &Target) -> OTarget {
    match t {
        Target::State(fp) => OTarget::State(fp.canonical.clone()),
        Target::Crashed { message } => OTarget::Crashed(message.clone()),
        Target::Exited => OTarget::Exited,
    }
}

/// The graph's states and edges in the oracle's vocabulary.
pub fn graph_sets(g: &EventFlowGraph) -> (BTreeSet<String>, BTreeSet<(String, String, OTarget)>) {
    let states = g.states.iter().map(|s| s.canonical.clone()).collect();
    let edges = g
        .edges
        .iter()
        .map(|e| {
            (
                e.source.canonical.clone(),
                e.component.to_string(),
                to_otarget(&e.target),
            )
        })
        .collect();
    (states, edges)
}

/// Copies a corpus bundle into a fresh temp dir so a test can mutate it.
pub fn copy_corpus(name: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_tree(&corpus_dir(name), dir.path());
    dir
}

fn copy_tree(from: &std::path::Path, to: &std::path::Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dest = to.join(entry.file_name());
        if entry.path().is_dir() {
            copy_tree(&entry.path(), &dest);
        } else {
            std::fs::copy(entry.path(), dest).unwrap();
        }
    }
}

/// Analyzes a corpus bundle into a temp db and loads it back.
pub fn analyzed_db(
    name: &str,
) -> (
    tempfile::TempDir,
    std::sync::Arc<guirepro_core::model_db::ModelDb>,
) {
    use guirepro_core::engine::{rip, RipConfig};
    use guirepro_core::model_db::{load, save, DbMeta};
    use guirepro_core::primer::build_static_universe;

    let b = corpus(name);
    let dir = tempfile::tempdir().unwrap();
    let universe = build_static_universe(&b);
    let out = rip(&b, RipConfig::default()).unwrap();
    let meta = DbMeta::new(&universe, &out.graph, "1970-01-01T00:00:00Z");
    save(dir.path(), &universe, &out, &meta).unwrap();
    let db = load(dir.path()).unwrap();
    (dir, std::sync::Arc::new(db))
}

/// Drives a launch-anchored session along `components`, always taking the
/// variant whose source is the (single) current estimate.
pub fn report_for_path(
    db: std::sync::Arc<guirepro_core::model_db::ModelDb>,
    components: &[String],
    id: &str,
) -> guirepro_core::report::BugReport {
    use guirepro_core::app_sim::Action;
    use guirepro_core::autocomplete::ReportSession;

    let mut s = ReportSession::open_with_id(db, true, id).unwrap();
    for c in components {
        let source = match s.estimate().iter().next() {
            Some(Target::State(fp)) => fp.short_id.clone(),
            other => panic!("no running state before {c}: {other:?}"),
        };
        s.confirm_step(c, Action::Tap, &source).unwrap();
    }
    s.finalize(&format!("path to {id}"), "").unwrap()
}
