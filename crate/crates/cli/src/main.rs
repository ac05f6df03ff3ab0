use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use scintikit::scenario::{self, ModelRequest, Overrides, Scenario, ScenarioError};
use scintikit::ModelKind;

#[derive(Parser)]
#[command(name = "scintikit", version, about = "Reaction-diffusion-drift scintillation kinetics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace, report and manifest.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the dimensionless groups and the regime they select.
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Decay-time constants of a scenario, without simulating it.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several models on one scenario and report their distances.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated model names, e.g. FULL_RDD,REACTION_DIFFUSION.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<ModelKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load and check a scenario.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// A model name or `auto`.
    #[arg(long)]
    model: Option<ModelRequest>,
    #[arg(long = "eps-small")]
    eps_small: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<Scenario, ScenarioError> {
        self.load_as(self.model)
    }

    fn load_as(&self, model: Option<ModelRequest>) -> Result<Scenario, ScenarioError> {
        let overrides = Overrides {
            model,
            eps_small: self.eps_small,
            seed: self.seed,
        };
        scenario::load_scenario_with(&self.scenario, &overrides)
    }
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)?).map_err(|e| io_error(&path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> ScenarioError {
    ScenarioError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn execute(command: Command) -> Result<serde_json::Value, ScenarioError> {
    match command {
        Command::Run { common, out } => {
            let s = common.load()?;
            let report = scenario::run_scenario(&s, &out)?;
            Ok(json!({
                "name": report.name,
                "model": report.model,
                "out": out.display().to_string(),
                "steps": report.steps,
                "relative_charge_drift": report.conservation.relative_drift,
                "bound_satisfied": report.decay.bound_satisfied,
            }))
        }
        Command::Classify { common } => {
            // classification ignores the model requested in the file
            let s = common.load_as(Some(ModelRequest::Auto))?;
            let p = &s.scaling;
            Ok(json!({
                "name": s.name(),
                "d": p.d,
                "m": p.m,
                "k": p.k,
                "coupling": p.coupling,
                "diffusion_length": p.diffusion_length,
                "eps_small": s.eps_small,
                "model": s.model,
            }))
        }
        Command::Certify { common, out } => {
            let s = common.load()?;
            let cert = serde_json::to_value(scenario::certify(&s)?)?;
            if let Some(dir) = out {
                write_json(&dir, "certificate.json", &cert)?;
            }
            Ok(cert)
        }
        Command::Compare { common, models, out } => {
            let s = common.load()?;
            let cmp = scenario::compare_models(&s, &models)?;
            std::fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            cmp.write_csv(&out.join("comparison.csv"))?;
            let summary: Vec<_> = cmp
                .pairs
                .iter()
                .map(|p| json!({"a": p.a, "b": p.b, "max_distance": p.max}))
                .collect();
            let value = json!({"name": s.name(), "steps": cmp.steps, "pairs": summary});
            write_json(&out, "comparison.json", &serde_json::to_value(&cmp)?)?;
            Ok(value)
        }
        Command::Validate { common } => {
            let s = common.load()?;
            Ok(json!({
                "valid": true,
                "name": s.name(),
                "model": s.model,
                "species": s.network.species(),
                "cells": s.grid.cells(),
                "outputs": s.outputs.len(),
            }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SCINTIKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let v = json!({"error": e.kind(), "message": e.to_string()});
            eprintln!("{v}");
            ExitCode::FAILURE
        }
    }
}
