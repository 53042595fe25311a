use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lifted_heston::experiments::{
    cmd_converge, cmd_sensitivity, cmd_simulate, cmd_vix, parse_pairs, ExperimentConfig,
};
use lifted_heston::sim::with_threads;

/// Lifted Heston Monte Carlo experiments.
#[derive(Parser, Debug)]
#[command(name = "lhsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Terminal samples and summary moments of S_T, V_T, X_T.
    Simulate,
    /// Moments of X_T against a fine Euler benchmark for each step size.
    Converge,
    /// Finite-difference sensitivities of the projection residual.
    Sensitivity,
    /// VIX option smiles for each step count.
    Vix,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named parameter set: set1, set2, set3, extreme, heston.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Scheme list, e.g. `clp`, `euler` or `clp,euler`.
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Comma-separated step counts.
    #[arg(long, global = true)]
    steps: Option<String>,
    /// Comma-separated maximum step sizes (takes precedence over --steps).
    #[arg(long, global = true)]
    dt: Option<String>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        let mut push = |k: &str, v: String| pairs.push((k.to_string(), v));
        if let Some(v) = &self.preset {
            push("preset", v.clone());
        }
        if let Some(v) = &self.scheme {
            push("scheme", v.clone());
        }
        if let Some(v) = &self.steps {
            push("steps", v.clone());
            push("dt", String::new());
        }
        if let Some(v) = &self.dt {
            push("dt", v.clone());
        }
        if let Some(v) = self.paths {
            push("paths", v.to_string());
        }
        if let Some(v) = self.seed {
            push("seed", v.to_string());
        }
        if let Some(v) = &self.out {
            push("out", v.display().to_string());
        }
        if let Some(v) = self.threads {
            push("threads", v.to_string());
        }
        for kv in &self.set {
            pairs.extend(parse_pairs(kv)?);
        }
        Ok(ExperimentConfig::from_pairs(&pairs)?)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.common.config()?;
    let command = cli.command;
    let written = with_threads(cfg.threads, || match command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Converge => cmd_converge(&cfg),
        Command::Sensitivity => cmd_sensitivity(&cfg),
        Command::Vix => cmd_vix(&cfg),
    })??;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
