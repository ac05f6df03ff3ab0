use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioError};
use crate::entropy;
use crate::rdd::{RddProblem, RunOutput, SolverError, StepControl};
use crate::scaling::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub a: ModelKind,
    pub b: ModelKind,
    /// `int sum_j |u_a - u_b|` at every output time.
    pub distances: Vec<f64>,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub models: Vec<ModelKind>,
    pub times: Vec<f64>,
    pub steps: usize,
    pub pairs: Vec<PairDistance>,
}

impl Comparison {
    pub fn pair(&self, a: ModelKind, b: ModelKind) -> Option<&PairDistance> {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ScenarioError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec!["time".to_string()];
        head.extend(self.pairs.iter().map(|p| format!("{}_vs_{}", p.a.name(), p.b.name())));
        w.write_record(&head).map_err(crate::trace::TraceError::from)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(self.pairs.iter().map(|p| format!("{:.16e}", p.distances[i])));
            w.write_record(&row).map_err(crate::trace::TraceError::from)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| ScenarioError::io(path, e.into_error()))?;
        fs::write(path, bytes).map_err(|e| ScenarioError::io(path, e))
    }
}

/// Runs related problems from one initial state on one step schedule.
///
/// The first problem is integrated adaptively; the others replay its
/// accepted steps, in parallel, so the reported distances measure the
/// models rather than their different step sequences.
pub fn compare_problems(
    problems: &[RddProblem<f64>],
    initial: &[f64],
    outputs: &[f64],
    control: &StepControl<f64>,
) -> Result<Comparison, ScenarioError> {
    if problems.len() < 2 {
        return Err(ScenarioError::Validation {
            invariant: "compare".into(),
            message: "need at least two models".into(),
        });
    }
    fn tag(p: &RddProblem<f64>) -> impl Fn(SolverError) -> ScenarioError {
        let model = p.model();
        move |source| ScenarioError::Model { model, source }
    }
    let lead = &problems[0];
    let reference = lead
        .state(0.0, initial.to_vec())
        .and_then(|s| lead.integrate(s, outputs, control))
        .map_err(tag(lead))?;
    let schedule = &reference.schedule;
    let rest: Vec<Result<RunOutput<f64>, ScenarioError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = problems[1..]
            .iter()
            .map(|p| {
                scope.spawn(move || {
                    p.state(0.0, initial.to_vec())
                        .and_then(|s| p.replay(s, schedule, outputs))
                        .map_err(tag(p))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("model run panicked"))
            .collect()
    });
    let mut runs = vec![reference.clone()];
    for r in rest {
        runs.push(r?);
    }
    let grid = lead.grid();
    let k = lead.species_count();
    let mut pairs = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let distances = runs[i]
                .records
                .iter()
                .zip(&runs[j].records)
                .map(|(a, b)| entropy::l1_distance(grid, k, &a.densities, &b.densities))
                .collect::<Result<Vec<f64>, _>>()
                .map_err(SolverError::from)?;
            pairs.push(PairDistance {
                a: problems[i].model(),
                b: problems[j].model(),
                max: distances.iter().fold(0.0, |a: f64, v| a.max(*v)),
                distances,
            });
        }
    }
    Ok(Comparison {
        models: problems.iter().map(|p| p.model()).collect(),
        times: outputs.to_vec(),
        steps: schedule.len(),
        pairs,
    })
}

/// [`compare_problems`] on the scenario's grid, scales and initial state.
pub fn compare_models(scenario: &Scenario, models: &[ModelKind]) -> Result<Comparison, ScenarioError> {
    let problems = models
        .iter()
        .map(|&m| scenario.problem(m))
        .collect::<Result<Vec<_>, _>>()?;
    compare_problems(
        &problems,
        &scenario.initial_run_densities(),
        &scenario.outputs,
        &scenario.control,
    )
}
