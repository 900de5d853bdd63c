//! Batch commands: `analyze`, `replay` and `export`.
//!
//! Each command writes its normal output to `out` and returns the process
//! exit code; hard failures are returned as errors and map to exit 1.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use guirepro_core::app_sim::load_bundle;
use guirepro_core::engine::{rip, RipConfig};
use guirepro_core::model_db::{self, DbMeta};
use guirepro_core::primer::build_static_universe;
use guirepro_core::report::{
    export_dot, export_markdown, import_json, replay_reports, BugReport, ReplayVerdict,
};
use guirepro_core::Execution;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_NOT_REPRODUCIBLE: u8 = 2;

/// Timestamp recorded in `meta.json`.
///
/// Databases must be byte-reproducible, so wall-clock time is never used:
/// `SOURCE_DATE_EPOCH` is honoured when set, otherwise the Unix epoch.
pub fn default_created_utc() -> Result<String> {
    let secs = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v
            .trim()
            .parse::<i64>()
            .with_context(|| format!("SOURCE_DATE_EPOCH is not an integer: {v:?}"))?,
        Err(_) => 0,
    };
    let Some(t) = chrono::DateTime::from_timestamp(secs, 0) else {
        bail!("SOURCE_DATE_EPOCH out of range: {secs}");
    };
    Ok(t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

pub struct AnalyzeArgs<'a> {
    pub bundle: &'a Path,
    pub out: &'a Path,
    pub config: RipConfig,
    pub created_utc: String,
    pub exec: Execution,
}

pub fn analyze(args: AnalyzeArgs<'_>, out: &mut impl Write) -> Result<u8> {
    let bundle = load_bundle(args.bundle)?;
    let universe = build_static_universe(&bundle);
    let ripped = rip(&bundle, args.config)?;
    let meta = DbMeta::new(&universe, &ripped.graph, args.created_utc);
    model_db::save_with(args.out, &universe, &ripped, &meta, args.exec)?;
    tracing::info!(db = %args.out.display(), "model saved");
    writeln!(
        out,
        "states={} edges={} truncated={}",
        ripped.graph.states.len(),
        ripped.graph.edges.len(),
        ripped.graph.truncated
    )?;
    Ok(EXIT_OK)
}

pub fn read_report(path: &Path) -> Result<BugReport> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    import_json(&bytes).with_context(|| format!("loading {}", path.display()))
}

/// Replays every report against the bundle. With a single report only the
/// verdict is printed; otherwise each line is prefixed by the report path.
pub fn replay(
    reports: &[PathBuf],
    bundle: &Path,
    exec: Execution,
    out: &mut impl Write,
) -> Result<u8> {
    let bundle = load_bundle(bundle)?;
    let loaded = reports
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>>>()?;
    let verdicts = replay_reports(&loaded, &bundle, exec);
    let mut code = EXIT_OK;
    for (path, verdict) in reports.iter().zip(verdicts) {
        let verdict = verdict.with_context(|| format!("replaying {}", path.display()))?;
        if verdict != ReplayVerdict::Reproducible {
            code = EXIT_NOT_REPRODUCIBLE;
        }
        if reports.len() == 1 {
            writeln!(out, "{verdict}")?;
        } else {
            writeln!(out, "{}: {verdict}", path.display())?;
        }
    }
    Ok(code)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Markdown,
    Dot,
}

/// Markdown renders the report itself; DOT renders the event-flow graph of
/// the model the report was written against, so it needs `db`.
pub fn export(
    report: &Path,
    format: ExportFormat,
    db: Option<&Path>,
    out: &mut impl Write,
) -> Result<u8> {
    let report = read_report(report)?;
    match format {
        ExportFormat::Markdown => out.write_all(export_markdown(&report).as_bytes())?,
        ExportFormat::Dot => {
            let Some(db) = db else {
                bail!("--format dot needs --db <model db>");
            };
            let db = model_db::load(db).with_context(|| format!("loading {}", db.display()))?;
            if db.meta.app_id != report.app_id || db.meta.version != report.version {
                bail!(
                    "report targets {} {} but db holds {} {}",
                    report.app_id,
                    report.version,
                    db.meta.app_id,
                    db.meta.version
                );
            }
            out.write_all(export_dot(&db.graph).as_bytes())?;
        }
    }
    Ok(EXIT_OK)
}
