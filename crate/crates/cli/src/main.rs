mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use experiments::{RunError, EXPERIMENTS};

/// Numerical checks of local asymptotics for heavy-tailed laws.
#[derive(Parser)]
#[command(name = "htl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        config: PathBuf,
        /// Directory for ratios.csv, plotdata.csv and verdict.json.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config convergence tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List experiments whose name or description contains FILTER.
    List { filter: Option<String> },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List { filter } => {
            let needle = filter.unwrap_or_default().to_lowercase();
            for e in EXPERIMENTS {
                if e.name.contains(&needle) || e.cites.to_lowercase().contains(&needle) {
                    let kind = if e.stochastic { "seeded" } else { "exact" };
                    println!("{:<18} {:<7} {}", e.name, kind, e.cites);
                }
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out_dir,
            seed,
            tol,
        } => run(&config, &out_dir, seed, tol),
    }
}

fn run(path: &Path, out_dir: &Path, seed: Option<u64>, tol: Option<f64>) -> ExitCode {
    let config_error = |msg: &dyn std::fmt::Display| {
        eprintln!("htl: config error: {msg}");
        ExitCode::from(2)
    };
    let mut cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => return config_error(&e),
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(t) = tol {
        cfg.tol = t;
    }
    if let Err(e) = cfg.validate() {
        return config_error(&e);
    }
    let Some(exp) = experiments::find(&cfg.experiment) else {
        let names: Vec<_> = EXPERIMENTS.iter().map(|e| e.name).collect();
        return config_error(&format!(
            "unknown experiment '{}' (known: {})",
            cfg.experiment,
            names.join(", ")
        ));
    };
    let outcome = match (exp.run)(&cfg) {
        Ok(o) => o,
        Err(RunError::Config(e)) => return config_error(&e),
        Err(RunError::Failed(e)) => {
            eprintln!("htl: {}: {e}", exp.name);
            let mut o = experiments::Outcome::default();
            o.checks
                .push(experiments::Check::failed(exp.name, &e.to_string()));
            o
        }
    };
    if let Err(e) = output::write_all(out_dir, &cfg, &outcome) {
        eprintln!("htl: writing {}: {e}", out_dir.display());
        return ExitCode::from(1);
    }
    for c in &outcome.checks {
        println!("{:?}\t{}\t{}", c.verdict, c.name, c.condition);
    }
    if output::passed(&outcome) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
