use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use incentive_marl::config::{parse_seeds, ExperimentConfig, ModeSelection};
use incentive_marl::error::{Error, Result};
use incentive_marl::harness::{
    action_distribution, actions_to_csv, curves_to_csv, evaluate, format_checks, load_runs,
    run_checks, run_experiment, RunOptions,
};

#[derive(Parser)]
#[command(
    version,
    about = "Manager-mediated multi-agent learning on a supply-chain game"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Key=value configuration file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// naive, managed or both.
    #[arg(long)]
    mode: Option<ModeSelection>,
    /// Inclusive range `a..b` or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Output (or input) directory for run artifacts.
    #[arg(long, default_value = "results/default")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (seed, mode) pair and write metrics and checkpoints.
    Run {
        #[command(flatten)]
        common: Common,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Skip writing network checkpoints.
        #[arg(long)]
        no_checkpoints: bool,
    },
    /// Pool the evaluation window of stored runs and compare the modes.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Per-episode mean order volume by supplier, averaged over seeds.
    Actions {
        #[command(flatten)]
        common: Common,
    },
    /// Run the invariant suite; also checks stored metrics when present.
    Check {
        #[command(flatten)]
        common: Common,
    },
}

/// Resolution order: defaults, then `<out>/config.txt` for commands that
/// read stored runs, then `--config`, then individual flags.
fn resolve_config(common: &Common, stored: bool) -> Result<ExperimentConfig> {
    let saved = common.out.join("config.txt");
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if stored && saved.exists() => ExperimentConfig::load(&saved)?,
        None => ExperimentConfig::default(),
    };
    if let Some(mode) = common.mode {
        cfg.mode = mode;
    }
    if let Some(seeds) = &common.seeds {
        cfg.seeds = parse_seeds(seeds)?;
    }
    if let Some(n) = common.episodes {
        cfg.episodes = n;
        cfg.eval_window = cfg.eval_window.min(n);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run {
            common,
            jobs,
            no_checkpoints,
        } => {
            let cfg = resolve_config(&common, false)?;
            let mut opts = RunOptions::new(&common.out);
            if let Some(j) = jobs {
                opts.jobs = j;
            }
            opts.checkpoints = !no_checkpoints;
            let runs = run_experiment(&cfg, &opts)?;
            println!("wrote {} runs to {}", runs.len(), common.out.display());
            let report = evaluate(&runs, cfg.eval_window)?;
            print!("{}", report.to_table());
            write(&common.out.join("report.txt"), &report.to_table())?;
            write(&common.out.join("report.csv"), &report.to_csv())?;
            Ok(true)
        }
        Command::Evaluate { common } => {
            let cfg = resolve_config(&common, true)?;
            let runs = load_runs(&common.out.join("metrics"))?;
            let report = evaluate(&runs, cfg.eval_window)?;
            print!("{}", report.to_table());
            write(&common.out.join("report.txt"), &report.to_table())?;
            write(&common.out.join("report.csv"), &report.to_csv())?;
            write(&common.out.join("curves.csv"), &curves_to_csv(&runs))?;
            Ok(true)
        }
        Command::Actions { common } => {
            let runs = load_runs(&common.out.join("metrics"))?;
            let csv = actions_to_csv(&action_distribution(&runs));
            write(&common.out.join("actions.csv"), &csv)?;
            print!("{csv}");
            Ok(true)
        }
        Command::Check { common } => {
            let cfg = resolve_config(&common, true)?;
            let metrics = common.out.join("metrics");
            let results = run_checks(&cfg, metrics.is_dir().then_some(metrics.as_path()));
            print!("{}", format_checks(&results));
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
