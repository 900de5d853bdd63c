mod common;

use guirepro_core::app_sim::{Action, ComponentType, SourceLoc};
use guirepro_core::engine::{rip, RipConfig};
use guirepro_core::model_db::to_canonical_json;
use guirepro_core::primer::*;

use common::{corpus, demo, CORPORA};

#[test]
fn demo_universe() {
    let u = build_static_universe(&demo());
    assert_eq!(u.records.len(), 4);
    assert_eq!(u.app_id, "com.example.demo");

    let crash = u.get("Main", "btnCrash").unwrap();
    assert_eq!(crash.ctype, ComponentType::Button);
    assert_eq!(
        crash.layout_source,
        SourceLoc::new("layouts/Main.layout", 5)
    );
    assert_eq!(
        crash.referencing_class_files,
        vec![
            SourceLoc::new("src/Main.logic", 5),
            SourceLoc::new("src/Main.logic", 7)
        ]
    );
    assert_eq!(
        u.get("Detail", "btnBack").unwrap().referencing_class_files,
        vec![SourceLoc::new("src/Detail.logic", 1)]
    );
    assert!(u
        .records
        .iter()
        .all(|r| r.possible_actions == [Action::Tap]));
}

#[test]
fn unreferenced_component_has_no_class_files() {
    let u = build_static_universe(&corpus("notes-app"));
    let sort = u.get("NoteList", "spnSort").unwrap();
    assert!(sort.referencing_class_files.is_empty());
    assert_eq!(sort.ctype, ComponentType::Spinner);
}

#[test]
fn possible_actions_table() {
    assert_eq!(possible_actions_for(ComponentType::Button), [Action::Tap]);
    assert_eq!(possible_actions_for(ComponentType::Checkbox), [Action::Tap]);
    assert_eq!(
        possible_actions_for(ComponentType::TextField),
        [Action::Tap]
    );
}

#[test]
fn traceability_links_resolve_to_lines_naming_the_component() {
    for name in CORPORA {
        let b = corpus(name);
        let u = build_static_universe(&b);
        assert_eq!(u.records.len(), b.component_count());
        for r in &u.records {
            let layout = b.source_line(&r.layout_source).unwrap();
            assert!(
                layout.trim_start().starts_with("component "),
                "{name}: {layout}"
            );
            assert!(layout.contains(r.component.as_str()));
            let mut sorted = r.referencing_class_files.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted, r.referencing_class_files);
            for loc in &r.referencing_class_files {
                let line = b.source_line(loc).unwrap();
                assert!(
                    line.contains(&format!("{}.{}", r.activity, r.component)),
                    "{name}: {loc} `{line}`"
                );
            }
        }
    }
}

#[test]
fn universe_covers_every_logic_mention_and_dynamic_record() {
    for name in CORPORA {
        let b = corpus(name);
        let u = build_static_universe(&b);
        for h in &b.handlers {
            assert!(u.contains(h.trigger.activity.as_str(), h.trigger.component.as_str()));
            for e in &h.effects {
                if let Some(t) = e.effect.target() {
                    assert!(u.contains(t.activity.as_str(), t.component.as_str()));
                }
            }
        }
        let g = rip(&b, RipConfig::default()).unwrap().graph;
        for e in &g.edges {
            assert!(u.contains(e.record.activity.as_str(), e.record.component.as_str()));
        }
    }
}

#[test]
fn building_twice_is_byte_identical() {
    for name in CORPORA {
        let b = corpus(name);
        assert_eq!(
            to_canonical_json(&build_static_universe(&b)),
            to_canonical_json(&build_static_universe(&b))
        );
    }
}
