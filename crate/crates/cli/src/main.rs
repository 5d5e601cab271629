use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fembem::experiment::{self, Experiment, ExperimentConfig};
use fembem::timestep::WeightScheme;

#[derive(Parser)]
#[command(name = "fembem", version, about = "FEM-BEM coupling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study or the capacitor demo.
    Run {
        /// smooth, corner, time_singular or capacitor
        #[arg(long)]
        experiment: Option<String>,
        /// Number of levels (studies) or refinement level (capacitor).
        #[arg(long)]
        levels: Option<usize>,
        /// euler or cn
        #[arg(long)]
        scheme: Option<String>,
        /// key = value file; command-line flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print log-log slopes of every error column.
        #[arg(long)]
        slopes: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    let Command::Run {
        experiment,
        levels,
        scheme,
        config,
        out,
        slopes,
    } = cli.command;
    let mut cfg = match &config {
        Some(path) => ExperimentConfig::from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = experiment {
        cfg.experiment = e.parse()?;
    }
    if let Some(l) = levels {
        cfg.levels = l;
    }
    if let Some(s) = scheme {
        cfg.scheme = s.parse::<WeightScheme>()?;
    }
    if let Some(o) = out {
        cfg.out = o;
    }

    match cfg.experiment {
        Experiment::Capacitor => {
            let run = experiment::run_capacitor(&cfg).context("capacitor demo failed")?;
            println!(
                "capacitor: {} steps, antisymmetry defect {:e}, {} sample points skipped",
                run.trajectory.grid.n_steps(),
                run.antisymmetry_defect,
                run.skipped_points
            );
            for (t, path) in &run.snapshots {
                println!("t = {t}: {}", path.display());
            }
        }
        Experiment::Manufactured(_) => {
            let report = experiment::run_experiment(&cfg)
                .with_context(|| format!("{} study failed", cfg.experiment.name()))?;
            println!("table: {}", experiment::table_path(&cfg).display());
            if slopes {
                print!("{}", report.slope_summary());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
