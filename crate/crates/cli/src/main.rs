use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dasvdd::{
    collect, render, run_experiment_with, sweep, ExperimentConfig, GammaSetting, SweepParam,
};

#[derive(Parser)]
#[command(
    name = "dasvdd",
    version,
    about = "Deep autoencoding support vector data description"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate `runs` seeded models described by a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        /// "auto" or a positive number.
        #[arg(long)]
        gamma: Option<GammaSetting>,
        #[arg(long = "normal-class")]
        normal_class: Option<i64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the experiment for each value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// latent_dim or gamma.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an AUC table from every summary.json under a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            gamma,
            normal_class,
            runs,
            out,
        } => {
            let mut cfg = load(&config, out)?;
            if let Some(seed) = seed {
                cfg.train.seed = seed;
            }
            if let Some(gamma) = gamma {
                cfg.train.gamma = gamma;
            }
            if normal_class.is_some() {
                cfg.normal_class = normal_class;
            }
            if let Some(runs) = runs {
                cfg.runs = runs;
            }
            cfg.validate()?;
            let summary = run_experiment_with(&cfg, |a| {
                println!(
                    "run {}: seed {} gamma {} AUC {:.4}",
                    a.run, a.seed, a.gamma, a.auc
                );
            })?;
            println!(
                "{}: AUC (%) {} over {} runs",
                summary.name, summary.auc_display, summary.runs
            );
            println!("outputs in {}", cfg.out_dir.display());
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = load(&config, out)?;
            let param: SweepParam = param.parse()?;
            let results = sweep(&cfg, param, &values)?;
            for (value, s) in &results {
                println!("{} = {value}: AUC (%) {}", param.as_str(), s.auc_display);
            }
            println!(
                "table in {}",
                cfg.out_dir
                    .join(format!("sweep_{}.csv", param.as_str()))
                    .display()
            );
        }
        Command::Report { dir } => {
            let report =
                collect(&dir).with_context(|| format!("reporting on {}", dir.display()))?;
            print!("{}", render(&report));
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
