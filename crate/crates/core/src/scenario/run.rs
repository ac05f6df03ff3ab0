use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioConfig, ScenarioError};
use crate::decay::{self, DecayConstants, DecayReport, HypothesisCheck};
use crate::entropy;
use crate::poisson;
use crate::rdd::{RddProblem, SystemState};
use crate::scaling::{ModelKind, ScalingPack};
use crate::trace::build_trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conservation {
    pub initial_charge: f64,
    pub final_charge: f64,
    /// Largest `|z . int u(t) - z . int u(0)|` over the records.
    pub max_drift: f64,
    /// `max_drift` over the gross initial charge `int sum_j |z_j| u_j`.
    pub relative_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub model: ModelKind,
    pub seed: u64,
    pub scaling: ScalingPack<f64>,
    pub steps: usize,
    pub rejected: usize,
    pub records: usize,
    /// Spatial mean of the equilibrium, per species, in run units.
    pub equilibrium_mean: Vec<f64>,
    pub conservation: Conservation,
    /// Largest discrete `|grad psi|` over the records; reported, not bounded.
    pub max_field_gradient: f64,
    pub decay: DecayReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimensionless {
    pub d: f64,
    pub m: f64,
    pub k: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub name: String,
    pub model: ModelKind,
    pub eps_small: f64,
    pub seed: u64,
    pub dimensionless: Dimensionless,
    pub scaling: ScalingPack<f64>,
    pub config: ScenarioConfig,
    pub network: String,
    pub files: Vec<String>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ScenarioError> {
    fs::write(path, bytes).map_err(|e| ScenarioError::io(path, e))
}

pub(crate) fn manifest(scenario: &Scenario, files: &[&str]) -> Manifest {
    let p = &scenario.scaling;
    Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        name: scenario.name().into(),
        model: scenario.model,
        eps_small: scenario.eps_small,
        seed: scenario.seed,
        dimensionless: Dimensionless {
            d: p.d,
            m: p.m,
            k: p.k,
            coupling: p.coupling,
        },
        scaling: p.clone(),
        config: scenario.config.clone(),
        network: scenario.network_text.clone(),
        files: files.iter().map(|s| s.to_string()).collect(),
    }
}

fn conservation(problem: &RddProblem<f64>, states: &[SystemState<f64>]) -> Conservation {
    let q: Vec<f64> = states.iter().map(|s| problem.total_charge(&s.densities)).collect();
    let q0 = q.first().copied().unwrap_or(0.0);
    let max_drift = q.iter().fold(0.0f64, |a, v| a.max((v - q0).abs()));
    let gross = states
        .first()
        .map(|s| poisson::gross_charge(problem.grid(), problem.network().charges(), &s.densities, 1.0))
        .unwrap_or(0.0);
    Conservation {
        initial_charge: q0,
        final_charge: q.last().copied().unwrap_or(0.0),
        max_drift,
        relative_drift: if gross > 0.0 { max_drift / gross } else { max_drift },
    }
}

/// Runs the scenario and writes `trace.csv`, `report.json`,
/// `manifest.json` and a row of `summary.csv` into `out`.
pub fn run_scenario(scenario: &Scenario, out: &Path) -> Result<RunReport, ScenarioError> {
    fs::create_dir_all(out).map_err(|e| ScenarioError::io(out, e))?;
    let problem = scenario.problem(scenario.model)?;
    let init = problem.state(0.0, scenario.initial_run_densities())?;
    let eq = problem.equilibrium(&init)?;
    log::info!(
        "{}: {} on {} cells, d = {:e}, m = {:e}, k = {:e}",
        scenario.name(),
        scenario.model,
        problem.cells(),
        scenario.scaling.d,
        scenario.scaling.m,
        scenario.scaling.k
    );
    let run = problem.integrate(init, &scenario.outputs, &scenario.control)?;
    log::info!("{} steps, {} rejected", run.schedule.len(), run.rejected);
    let phi_inf = problem.boltzmann_sup_potential().unwrap_or(f64::NAN);
    let trace = build_trace(&problem, &eq, &run.records, phi_inf)?;
    let decay = decay::decay_report(&problem, &eq, &trace);

    let k = problem.species_count();
    let report = RunReport {
        name: scenario.name().into(),
        model: scenario.model,
        seed: scenario.seed,
        scaling: scenario.scaling.clone(),
        steps: run.schedule.len(),
        rejected: run.rejected,
        records: trace.records.len(),
        equilibrium_mean: problem
            .species_totals(&eq.densities)
            .iter()
            .map(|t| t / problem.grid().total_volume())
            .collect(),
        conservation: conservation(&problem, &run.records),
        max_field_gradient: trace.records.iter().fold(0.0, |a, r| a.max(r.grad_sup)),
        decay,
    };
    debug_assert_eq!(report.equilibrium_mean.len(), k);

    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    write_file(&out.join("trace.csv"), &csv)?;
    write_file(&out.join("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    let files = ["trace.csv", "report.json", "manifest.json", "summary.csv"];
    write_file(
        &out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest(scenario, &files))?.as_bytes(),
    )?;
    append_summary(&out.join("summary.csv"), &report)?;
    Ok(report)
}

fn append_summary(path: &Path, r: &RunReport) -> Result<(), ScenarioError> {
    let fresh = !path.exists();
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| ScenarioError::io(path, e))?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let c = r.decay.constants.as_ref();
    let fit = r.decay.fit.as_ref();
    let mut text = String::new();
    if fresh {
        text += "name,model,c1,c2,tau_estimate,tau_fast,tau_slow,relative_charge_drift,bound_satisfied\n";
    }
    text += &format!(
        "{},{},{},{},{},{},{},{:.16e},{}\n",
        r.name,
        r.model,
        opt(c.map(|c| c.c1)),
        opt(c.map(|c| c.c2)),
        opt(c.map(|c| c.tau_estimate)),
        opt(fit.map(|f| f.tau_fast)),
        opt(fit.map(|f| f.tau_slow)),
        r.conservation.relative_drift,
        serde_json::to_value(r.decay.bound_satisfied)?.as_str().unwrap_or("")
    );
    f.write_all(text.as_bytes()).map_err(|e| ScenarioError::io(path, e))
}

pub fn read_report(path: &Path) -> Result<RunReport, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Decay constants of a scenario without simulating it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub model: ModelKind,
    pub species: usize,
    pub phi_inf_sup: Option<f64>,
    pub t_over_m: Option<f64>,
    pub k0: Option<f64>,
    pub poincare: f64,
    pub g0: f64,
    pub constants: Option<DecayConstants<f64>>,
    pub hypotheses: Option<HypothesisCheck>,
    /// `L / (2 d min M*)`, in run time units.
    pub diffusive_bound: f64,
    /// `diffusive_bound` in seconds (scaled back by `T`).
    pub diffusive_bound_physical: f64,
    pub notes: Vec<String>,
}

pub fn certify(scenario: &Scenario) -> Result<Certificate, ScenarioError> {
    let problem = scenario.problem(scenario.model)?;
    // the estimate concerns the full coupled system
    let full = problem.with_model(ModelKind::FullRdd)?;
    let init = full.state(0.0, scenario.initial_run_densities())?;
    let eq = full.equilibrium(&init)?;
    let k = full.species_count();
    let g0 = entropy::relative_entropy(
        full.grid(),
        k,
        &init.densities,
        &init.potential.values,
        &eq.densities,
        &eq.potential.values,
        full.field_weight(),
    )?;
    let mut notes = Vec::new();
    let phi = match full.boltzmann_sup_potential() {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("Phi_inf: {e}"));
            None
        }
    };
    let min_mob = full.mobility().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let t_over_m = (full.m() > 0.0).then(|| 1.0 / (full.m() * min_mob));
    let k0 = full.network().zero_state_rate();
    let poincare = full.grid().poincare_constant();
    let mut constants = None;
    let mut hypotheses = None;
    if k != 2 {
        notes.push(format!("explicit estimate is stated for two species; network has {k}"));
    } else if let (Some(p), Some(tm)) = (phi, t_over_m) {
        match decay::decay_constants(p, tm, k0, poincare, g0) {
            Ok(c) => {
                constants = Some(c);
                hypotheses = Some(decay::check_hypotheses(p, full.network().reference(), &eq.densities[..k]));
            }
            Err(e) => notes.push(e.to_string()),
        }
    }
    let diffusive_bound = poincare / (2.0 * full.d() * min_mob);
    Ok(Certificate {
        name: scenario.name().into(),
        model: scenario.model,
        species: k,
        phi_inf_sup: phi,
        t_over_m,
        k0,
        poincare,
        g0,
        constants,
        hypotheses,
        diffusive_bound,
        diffusive_bound_physical: diffusive_bound * scenario.scaling.time,
        notes,
    })
}
