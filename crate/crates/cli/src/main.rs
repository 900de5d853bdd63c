use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Result;
use clap::{Parser, Subcommand};
use guirepro_cli::commands::{self, AnalyzeArgs, ExportFormat, EXIT_FAILURE};
use guirepro_cli::service::{self, ServiceConfig, DEFAULT_TTL_SECONDS};
use guirepro_core::engine::RipConfig;
use guirepro_core::Execution;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "guirepro",
    version,
    about = "Model GUI apps and auto-complete replayable bug reports"
)]
struct Cli {
    /// Run batch work (rendering, replay) on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model db from an app bundle.
    Analyze {
        bundle: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = RipConfig::default().max_states)]
        max_states: usize,
        #[arg(long, default_value_t = RipConfig::default().max_depth)]
        max_depth: usize,
        /// Timestamp for meta.json (defaults to SOURCE_DATE_EPOCH or the epoch).
        #[arg(long)]
        created_utc: Option<String>,
    },
    /// Replay reports against a bundle; exit 2 unless all reproduce.
    Replay {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Render a report as Markdown, or its model's event-flow graph as DOT.
    Export {
        report: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Model db (required for DOT).
        #[arg(long)]
        db: Option<PathBuf>,
    },
    /// Serve the session/report HTTP API over a model db.
    Serve {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Session time-to-live in seconds.
        #[arg(long, default_value_t = DEFAULT_TTL_SECONDS, value_parser = clap::value_parser!(u64).range(1..))]
        ttl: u64,
        /// Where finalized reports are written.
        #[arg(long, default_value = "reports")]
        reports: PathBuf,
    },
}

fn run(cli: Cli) -> Result<u8> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Analyze {
            bundle,
            out,
            max_states,
            max_depth,
            created_utc,
        } => {
            let created_utc = match created_utc {
                Some(t) => t,
                None => commands::default_created_utc()?,
            };
            commands::analyze(
                AnalyzeArgs {
                    bundle: &bundle,
                    out: &out,
                    config: RipConfig {
                        max_states,
                        max_depth,
                    },
                    created_utc,
                    exec,
                },
                &mut stdout,
            )
        }
        Command::Replay { reports, bundle } => {
            commands::replay(&reports, &bundle, exec, &mut stdout)
        }
        Command::Export { report, format, db } => {
            commands::export(&report, format, db.as_deref(), &mut stdout)
        }
        Command::Serve {
            db,
            bind,
            ttl,
            reports,
        } => {
            let config = ServiceConfig {
                db_dir: db,
                bind_address: bind,
                session_ttl: Duration::from_secs(ttl),
                reports_dir: reports,
            };
            tokio::runtime::Runtime::new()?.block_on(service::serve(config))?;
            Ok(commands::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    // Exit 2 is reserved for "not reproducible", so usage errors exit 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
