use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use netsel::pipeline::{Pipeline, RunConfig, Stage};

#[derive(Parser, Debug)]
#[command(name = "netsel", version, about = "Infer, evaluate and select network representations")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for artifacts and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run even when upstream artifacts are stale.
    #[arg(long, global = true)]
    force: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Load the event log, split it and build attributes and labels.
    Ingest,
    /// Generate a planted-community dataset.
    Synth,
    /// Build every configured network.
    Infer,
    /// Score all models on validation and testing.
    Evaluate,
    /// Selection summaries and rank statistics.
    Select,
    /// Significance of each model's efficiency.
    Significance,
    /// Rewiring noise sweep.
    Noise,
    /// Write the CSV reports.
    Report,
    /// All stages in order.
    Run,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Ingest => Stage::Ingest,
            Command::Synth => Stage::Synth,
            Command::Infer => Stage::Infer,
            Command::Evaluate => Stage::Evaluate,
            Command::Select => Stage::Select,
            Command::Significance => Stage::Significance,
            Command::Noise => Stage::Noise,
            Command::Report => Stage::Report,
            Command::Run => return None,
        })
    }
}

fn load(cli: &Cli) -> netsel::Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| netsel::Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    } else if cfg.out.is_relative() {
        let base = path.parent().unwrap_or(std::path::Path::new(""));
        cfg.out = base.join(&cfg.out);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> netsel::Result<()> {
    let cfg = load(cli)?;
    let mut p = Pipeline::new(cfg, cli.force)?;
    match cli.command.stage() {
        Some(stage) => p.run_stage(stage)?,
        None => {
            p.run_all()?;
        }
    }
    let m = p.manifest();
    let skipped: u64 = m.skipped_jobs.values().sum();
    if skipped > 0 {
        log::warn!("{skipped} jobs skipped");
    }
    for f in &m.report_files {
        println!("{}", p.out_dir().join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
