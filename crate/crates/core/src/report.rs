//! Bug reports: data model, exporters and the replay checker.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_sim::{
    self, Action, ActivityId, AppBundle, ComponentId, ComponentType, Fingerprint, SourceLoc,
};
use crate::engine::{EventFlowGraph, Target};
use crate::model_db::to_canonical_json;
use crate::par::Execution;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(
        "report targets {report_app} {report_version} but bundle is {bundle_app} {bundle_version}"
    )]
    AppMismatch {
        report_app: String,
        report_version: String,
        bundle_app: String,
        bundle_version: String,
    },
    #[error("malformed report: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Traceability {
    pub layout_source: SourceLoc,
    pub referencing_class_files: Vec<SourceLoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentedStep {
    pub index: usize,
    pub action: Action,
    pub activity: ActivityId,
    pub component: ComponentId,
    pub component_type: ComponentType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_state: Option<Fingerprint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    pub traceability: Traceability,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BugReport {
    pub report_id: String,
    pub app_id: String,
    pub version: String,
    pub title: String,
    pub description: String,
    pub degraded: bool,
    pub steps: Vec<AugmentedStep>,
    /// Present exactly when the report is not degraded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_outcome: Option<Target>,
}

impl BugReport {
    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |m: String| Err(ReportError::Malformed(m));
        if self.steps.is_empty() {
            return bad("report has no steps".into());
        }
        if self.expected_outcome.is_some() == self.degraded {
            return bad(
                "expected_outcome must be present exactly when the report is not degraded".into(),
            );
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.index != i + 1 {
                return bad(format!("step {} has index {}", i + 1, s.index));
            }
            let present = [
                s.screenshot.is_some(),
                s.source_state.is_some(),
                s.target.is_some(),
            ];
            if present.iter().any(|p| *p != present[0]) {
                return bad(format!(
                    "step {}: screenshot, source_state and target must be all present or all absent",
                    s.index
                ));
            }
            if !present[0] && !self.degraded {
                return bad(format!(
                    "step {} lacks model data in a non-degraded report",
                    s.index
                ));
            }
        }
        Ok(())
    }

    /// The same report with step `index` (1-based) removed and the rest
    /// renumbered.
    pub fn without_step(&self, index: usize) -> BugReport {
        let mut r = self.clone();
        r.steps.remove(index - 1);
        for (i, s) in r.steps.iter_mut().enumerate() {
            s.index = i + 1;
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ReplayVerdict {
    Reproducible,
    FailedAtStep { index: usize, reason: String },
    OutcomeMismatch { expected: Target, actual: Target },
}

impl fmt::Display for ReplayVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayVerdict::Reproducible => f.write_str("REPRODUCIBLE"),
            ReplayVerdict::FailedAtStep { index, reason } => {
                write!(f, "FailedAtStep {index}: {reason}")
            }
            ReplayVerdict::OutcomeMismatch { expected, actual } => write!(
                f,
                "OutcomeMismatch: expected {} but reached {}",
                expected.label(),
                actual.label()
            ),
        }
    }
}

/// Replays the report's steps from launch on the simulator.
///
/// A step fails when its component is not a visible, enabled widget of the
/// current screen. Non-degraded reports must also end in their recorded
/// outcome.
pub fn replay_report(report: &BugReport, bundle: &AppBundle) -> Result<ReplayVerdict, ReportError> {
    if report.app_id != bundle.app_id || report.version != bundle.version {
        return Err(ReportError::AppMismatch {
            report_app: report.app_id.clone(),
            report_version: report.version.clone(),
            bundle_app: bundle.app_id.clone(),
            bundle_version: bundle.version.clone(),
        });
    }

    let mut state = app_sim::launch(bundle);
    for (i, step) in report.steps.iter().enumerate() {
        let index = i + 1;
        let fail = |reason: String| Ok(ReplayVerdict::FailedAtStep { index, reason });
        let Ok(screen) = app_sim::observe(bundle, &state) else {
            return fail("app terminated before this step".into());
        };
        if screen.activity != step.activity {
            return fail(format!(
                "component {} not on screen (current activity {})",
                step.component, screen.activity
            ));
        }
        match screen.widget(step.component.as_str()) {
            None => return fail(format!("component {} not on screen", step.component)),
            Some(w) if !w.visible => {
                return fail(format!("component {} not visible", step.component))
            }
            Some(w) if !w.enabled => {
                return fail(format!("component {} not enabled", step.component))
            }
            Some(_) => {}
        }
        let outcome = app_sim::apply_action(bundle, &state, step.component.as_str(), step.action)
            .expect("target checked actionable");
        state = outcome.into_state(&state);
    }

    if let Some(expected) = &report.expected_outcome {
        let actual = Target::of_sim_state(bundle, &state);
        if &actual != expected {
            return Ok(ReplayVerdict::OutcomeMismatch {
                expected: expected.clone(),
                actual,
            });
        }
    }
    Ok(ReplayVerdict::Reproducible)
}

/// Replays many reports against one bundle.
pub fn replay_reports(
    reports: &[BugReport],
    bundle: &AppBundle,
    exec: Execution,
) -> Vec<Result<ReplayVerdict, ReportError>> {
    exec.map(reports, |r| replay_report(r, bundle))
}

pub fn export_json(report: &BugReport) -> Vec<u8> {
    to_canonical_json(report)
}

pub fn import_json(bytes: &[u8]) -> Result<BugReport, ReportError> {
    let report: BugReport =
        serde_json::from_slice(bytes).map_err(|e| ReportError::Malformed(e.to_string()))?;
    report.validate()?;
    Ok(report)
}

fn outcome_sentence(target: &Target) -> String {
    match target {
        Target::State(fp) => format!(
            "App reaches state `{}` on `{}`.",
            fp.short_id,
            fp.activity()
        ),
        Target::Crashed { message } => format!("App crashes: `{message}`."),
        Target::Exited => "App exits.".to_owned(),
    }
}

pub fn export_markdown(report: &BugReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# {}\n", report.title);
    let _ = writeln!(md, "- App: `{}` {}", report.app_id, report.version);
    let _ = writeln!(md, "- Report: `{}`", report.report_id);
    if report.degraded {
        md.push_str("- Degraded: yes (some steps were recorded without a model match)\n");
    }
    md.push_str("\n## Description\n\n");
    if report.description.trim().is_empty() {
        md.push_str("_No description provided._\n");
    } else {
        let _ = writeln!(md, "{}", report.description.trim_end());
    }

    md.push_str("\n## Steps to Reproduce\n\n");
    for s in &report.steps {
        let _ = writeln!(
            md,
            "{}. Tap `{}` on `{}` ({})[^{}]",
            s.index, s.component, s.activity, s.component_type, s.index
        );
        match &s.screenshot {
            Some(shot) => {
                let _ = writeln!(md, "   ![Step {}]({})", s.index, shot);
            }
            None => md.push_str("   (no screenshot available)\n"),
        }
    }

    md.push_str("\n## Outcome\n\n");
    match &report.expected_outcome {
        Some(t) => {
            let _ = writeln!(md, "{}", outcome_sentence(t));
        }
        None => md.push_str("Not recorded (degraded report).\n"),
    }

    md.push('\n');
    for s in &report.steps {
        let t = &s.traceability;
        let _ = write!(md, "[^{}]: layout {}", s.index, t.layout_source);
        if t.referencing_class_files.is_empty() {
            md.push_str("; no logic references");
        } else {
            let refs: Vec<String> = t
                .referencing_class_files
                .iter()
                .map(ToString::to_string)
                .collect();
            let _ = write!(md, "; logic {}", refs.join(", "));
        }
        md.push('\n');
    }
    md
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export_dot(graph: &EventFlowGraph) -> String {
    let mut dot = String::from("digraph event_flow {\n  rankdir=LR;\n  node [shape=ellipse];\n");
    for s in &graph.states {
        let extra = if s == &graph.launch_state {
            ", peripheries=2"
        } else {
            ""
        };
        let _ = writeln!(dot, "  \"{0}\" [label=\"{0}\"{extra}];", s.short_id);
    }
    dot.push_str("  \"CRASHED\" [shape=box, label=\"CRASHED\"];\n");
    dot.push_str("  \"EXITED\" [shape=box, label=\"EXITED\"];\n");
    for e in &graph.edges {
        let (to, extra) = match &e.target {
            Target::State(fp) => (fp.short_id.clone(), String::new()),
            Target::Crashed { message } => (
                "CRASHED".to_owned(),
                format!(", tooltip=\"{}\"", dot_escape(message)),
            ),
            Target::Exited => ("EXITED".to_owned(), String::new()),
        };
        let _ = writeln!(
            dot,
            "  \"{}\" -> \"{}\" [label=\"{}/{}\"{}];",
            e.source.short_id,
            to,
            dot_escape(e.component.as_str()),
            e.action,
            extra
        );
    }
    dot.push_str("}\n");
    dot
}
