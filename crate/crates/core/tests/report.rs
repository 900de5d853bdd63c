mod common;

use guirepro_core::app_sim::Action;
use guirepro_core::autocomplete::ReportSession;
use guirepro_core::engine::Target;
use guirepro_core::model_db::ModelDb;
use guirepro_core::report::*;
use guirepro_core::Execution;
use proptest::prelude::*;
use std::sync::{Arc, OnceLock};

use common::{analyzed_db, corpus, demo, oracle, report_for_path, CORPORA};

fn shared_demo_db() -> Arc<ModelDb> {
    static DB: OnceLock<(tempfile::TempDir, Arc<ModelDb>)> = OnceLock::new();
    DB.get_or_init(|| analyzed_db("demo-app")).1.clone()
}

fn crash_report() -> BugReport {
    report_for_path(
        shared_demo_db(),
        &["chkOpt".into(), "btnCrash".into()],
        "crash",
    )
}

#[test]
fn crash_report_is_reproducible() {
    let r = crash_report();
    assert_eq!(
        r.expected_outcome,
        Some(Target::Crashed {
            message: "NullPointerException".into()
        })
    );
    assert_eq!(
        replay_report(&r, &demo()).unwrap(),
        ReplayVerdict::Reproducible
    );
    assert_eq!(
        replay_report(&r, &demo()).unwrap().to_string(),
        "REPRODUCIBLE"
    );
}

#[test]
fn deleting_a_required_step_fails_replay() {
    let r = crash_report().without_step(1);
    assert_eq!(r.steps[0].index, 1);
    let v = replay_report(&r, &demo()).unwrap();
    assert_eq!(
        v,
        ReplayVerdict::FailedAtStep {
            index: 1,
            reason: "component btnCrash not visible".into()
        }
    );
    assert_eq!(
        v.to_string(),
        "FailedAtStep 1: component btnCrash not visible"
    );
}

#[test]
fn wrong_outcome_is_mismatch() {
    let (_d, db) = analyzed_db("demo-app");
    let mut r = report_for_path(db.clone(), &["btnGo".into(), "btnBack".into()], "x");
    let detail = db
        .graph
        .states
        .iter()
        .find(|s| s.activity() == "Detail")
        .unwrap()
        .clone();
    r.expected_outcome = Some(Target::State(detail));
    match replay_report(&r, &demo()).unwrap() {
        ReplayVerdict::OutcomeMismatch { actual, .. } => {
            assert_eq!(actual, Target::State(db.graph.launch_state.clone()))
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn terminated_app_fails_following_step() {
    let mut r = crash_report();
    let extra = r.steps[0].clone();
    r.steps.push(extra);
    r.steps[2].index = 3;
    let v = replay_report(&r, &demo()).unwrap();
    assert_eq!(
        v,
        ReplayVerdict::FailedAtStep {
            index: 3,
            reason: "app terminated before this step".into()
        }
    );
}

#[test]
fn app_mismatch_is_an_error() {
    let r = crash_report();
    assert!(matches!(
        replay_report(&r, &corpus("notes-app")),
        Err(ReportError::AppMismatch { .. })
    ));
}

#[test]
fn shortest_paths_reproduce_and_every_step_is_required() {
    for name in CORPORA {
        let (_d, db) = analyzed_db(name);
        let bundle = corpus(name);
        let o = oracle::enumerate(&bundle);
        for (target, path) in &o.shortest {
            if path.is_empty() {
                continue;
            }
            let r = report_for_path(db.clone(), path, "p");
            assert_eq!(
                &common::to_otarget(r.expected_outcome.as_ref().unwrap()),
                target
            );
            assert_eq!(
                replay_report(&r, &bundle).unwrap(),
                ReplayVerdict::Reproducible
            );
            for i in 1..=r.steps.len() {
                let v = replay_report(&r.without_step(i), &bundle).unwrap();
                assert_ne!(
                    v,
                    ReplayVerdict::Reproducible,
                    "{name}: step {i} of {path:?}"
                );
            }
        }
    }
}

#[test]
fn json_round_trip_is_byte_identical() {
    let r = crash_report();
    let bytes = export_json(&r);
    let back = import_json(&bytes).unwrap();
    assert_eq!(back, r);
    assert_eq!(export_json(&back), bytes);
}

#[test]
fn degraded_report_omits_outcome() {
    let (_d, db) = analyzed_db("demo-app");
    let mut s = ReportSession::open(db, true).unwrap();
    s.fallback_step("Main", "chkOpt", Action::Tap).unwrap();
    let r = s.finalize("t", "d").unwrap();
    assert!(r.degraded && r.expected_outcome.is_none());
    let json = String::from_utf8(export_json(&r)).unwrap();
    assert!(!json.contains("expected_outcome"));
    assert!(!json.contains("screenshot"));
    assert_eq!(import_json(json.as_bytes()).unwrap(), r);
    assert_eq!(
        replay_report(&r, &demo()).unwrap(),
        ReplayVerdict::Reproducible
    );

    let md = export_markdown(&r);
    assert!(md.contains("1. Tap `chkOpt` on `Main` (checkbox)[^1]"));
    assert!(md.contains("   (no screenshot available)"));
    assert!(md.contains("Degraded: yes"));
}

#[test]
fn import_rejects_malformed_reports() {
    let r = crash_report();
    assert!(matches!(import_json(b"{"), Err(ReportError::Malformed(_))));

    let mut no_outcome = r.clone();
    no_outcome.expected_outcome = None;
    assert!(import_json(&export_json(&no_outcome)).is_err());

    let mut gap = r.clone();
    gap.steps[1].index = 5;
    assert!(import_json(&export_json(&gap)).is_err());

    let mut v: serde_json::Value = serde_json::from_slice(&export_json(&r)).unwrap();
    v["surprise"] = 1.into();
    assert!(import_json(&serde_json::to_vec(&v).unwrap()).is_err());
}

#[test]
fn markdown_lists_steps_with_screenshots() {
    let r = crash_report();
    let md = export_markdown(&r);
    assert_eq!(md, export_markdown(&r));
    assert!(md.starts_with("# path to crash\n"));
    assert!(md.contains("1. Tap `chkOpt` on `Main` (checkbox)[^1]"));
    assert!(md.contains("2. Tap `btnCrash` on `Main` (button)[^2]"));
    assert!(md.contains(&format!(
        "   ![Step 2]({})",
        r.steps[1].screenshot.as_ref().unwrap()
    )));
    assert!(md.contains("App crashes: `NullPointerException`."));
    assert!(
        md.contains("[^2]: layout layouts/Main.layout:5; logic src/Main.logic:5, src/Main.logic:7")
    );
    assert_eq!(md.lines().filter(|l| l.starts_with("1. ")).count(), 1);
}

#[test]
fn dot_has_every_state_and_edge() {
    let (_d, db) = analyzed_db("demo-app");
    let dot = export_dot(&db.graph);
    assert_eq!(dot, export_dot(&db.graph));
    assert!(dot.starts_with("digraph event_flow {\n"));
    assert!(dot.ends_with("}\n"));
    for s in &db.graph.states {
        assert!(dot.contains(&format!("  \"{0}\" [label=\"{0}\"", s.short_id)));
    }
    assert!(dot.contains("\"CRASHED\" [shape=box"));
    assert!(dot.contains("\"EXITED\" [shape=box"));
    assert_eq!(dot.matches(" -> ").count(), 7);
    assert!(dot.contains("tooltip=\"NullPointerException\""));
    assert_eq!(dot.matches("peripheries=2").count(), 1);
}

#[test]
fn dot_escapes_quotes() {
    let (_d, db) = analyzed_db("shop-app");
    let dot = export_dot(&db.graph);
    assert!(dot.contains("tooltip=\"PaymentGatewayTimeout\""));
    assert!(dot.contains("-> \"EXITED\""));
}

#[test]
fn batch_replay_matches_across_modes() {
    let mut reports = Vec::new();
    for name in ["demo-app"] {
        let (_d, db) = analyzed_db(name);
        let o = oracle::enumerate(&corpus(name));
        for path in o.shortest.values().filter(|p| !p.is_empty()) {
            let r = report_for_path(db.clone(), path, "b");
            reports.push(r.clone());
            reports.push(r.without_step(1));
        }
    }
    let seq: Vec<_> = replay_reports(&reports, &demo(), Execution::Sequential)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let par: Vec<_> = replay_reports(&reports, &demo(), Execution::Parallel)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    assert_eq!(seq, par);
    assert!(seq.iter().any(|v| v == &ReplayVerdict::Reproducible));
    assert!(seq.iter().any(|v| v != &ReplayVerdict::Reproducible));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn export_import_round_trips(title in "[ -~]{1,40}", desc in "\\PC{0,80}", take in 1usize..3) {
        let db = shared_demo_db();
        let mut s = ReportSession::open(db.clone(), true).unwrap();
        s.confirm_step("chkOpt", Action::Tap, &db.graph.launch_state.short_id).unwrap();
        if take > 1 {
            s.fallback_step("Main", "btnGo", Action::Tap).unwrap();
        }
        prop_assume!(!title.trim().is_empty());
        let r = s.finalize(&title, &desc).unwrap();
        let bytes = export_json(&r);
        let back = import_json(&bytes).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(export_json(&back), bytes);
    }
}
