//! Per-output diagnostics of a run and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::entropy::{self, EntropyError};
use crate::rdd::{RddProblem, SystemState};
use crate::scalar::Real;

/// Diagnostics at one output time. Distances are to the equilibrium the
/// run relaxes to; `rel_entropy` is the relative entropy in units of
/// `theta k_B` and `dissipation` its negative time derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord<T> {
    pub time: T,
    /// `int u_j` per species.
    pub species_l1: Vec<T>,
    pub dist_l1: T,
    /// `sum_j int (u_j - u_inf_j)^2`.
    pub l2_dist_sq: T,
    pub charge: T,
    pub rel_entropy: T,
    pub dissipation: T,
    pub phi_sup: T,
    pub phi_inf_sup: T,
    pub h1_dist_sq: T,
    /// Largest `|psi_{i+1} - psi_i| / h` over interior faces, the discrete
    /// `|grad psi|_inf`.
    pub grad_sup: T,
}

impl<T: Real> TraceRecord<T> {
    /// `|u - u_inf|_1^2 + |psi - psi_inf|_{H^1}^2`, the quantity bounded by
    /// the decay estimate.
    pub fn decay_lhs(&self) -> T {
        self.dist_l1 * self.dist_l1 + self.h1_dist_sq
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace<T> {
    pub species: Vec<String>,
    pub records: Vec<TraceRecord<T>>,
}

pub fn build_trace<T: Real>(
    problem: &RddProblem<T>,
    equilibrium: &SystemState<T>,
    states: &[SystemState<T>],
    phi_inf_sup: T,
) -> Result<Trace<T>, EntropyError> {
    let grid = problem.grid();
    let k = problem.species_count();
    let weight = problem.field_weight();
    let mut records = Vec::with_capacity(states.len());
    for s in states {
        records.push(TraceRecord {
            time: s.time,
            species_l1: problem.species_totals(&s.densities),
            dist_l1: entropy::l1_distance(grid, k, &s.densities, &equilibrium.densities)?,
            l2_dist_sq: l2_distance_sq(problem, &s.densities, &equilibrium.densities),
            charge: problem.total_charge(&s.densities),
            rel_entropy: entropy::relative_entropy(
                grid,
                k,
                &s.densities,
                &s.potential.values,
                &equilibrium.densities,
                &equilibrium.potential.values,
                weight,
            )?,
            dissipation: T::zero(),
            phi_sup: problem.sup_potential(s),
            phi_inf_sup,
            h1_dist_sq: entropy::h1_distance_sq(grid, &s.potential.values, &equilibrium.potential.values)?,
            grad_sup: gradient_sup(problem, &s.potential.values),
        });
    }
    let times: Vec<T> = records.iter().map(|r| r.time).collect();
    let values: Vec<T> = records.iter().map(|r| r.rel_entropy).collect();
    for (r, d) in records.iter_mut().zip(entropy::dissipation_series(&times, &values)?) {
        r.dissipation = d;
    }
    Ok(Trace {
        species: problem.network().species().to_vec(),
        records,
    })
}

fn gradient_sup<T: Real>(problem: &RddProblem<T>, psi: &[T]) -> T {
    let grid = problem.grid();
    psi.windows(2)
        .enumerate()
        .fold(T::zero(), |m, (i, w)| m.max((w[1] - w[0]).abs() / grid.center_gap(i)))
}

fn l2_distance_sq<T: Real>(problem: &RddProblem<T>, a: &[T], b: &[T]) -> T {
    let k = problem.species_count();
    a.chunks(k)
        .zip(b.chunks(k))
        .zip(problem.grid().volumes())
        .map(|((x, y), v)| *v * x.iter().zip(y).map(|(p, q)| (*p - *q) * (*p - *q)).sum::<T>())
        .sum()
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed trace: {0}")]
    Format(String),
}

fn header(species: &[String]) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    h.extend(species.iter().map(|s| format!("l1_{s}")));
    for c in ["dist_l1", "l2_dist_sq", "charge", "rel_entropy", "dissipation", "phi_sup", "phi_inf_sup", "h1_dist_sq", "grad_sup"] {
        h.push(c.into());
    }
    h
}

impl Trace<f64> {
    /// Writes the trace with every value at 17 significant digits, so the
    /// text round-trips exactly.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TraceError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header(&self.species))?;
        for r in &self.records {
            let mut row = vec![r.time];
            row.extend(&r.species_l1);
            row.extend([
                r.dist_l1,
                r.l2_dist_sq,
                r.charge,
                r.rel_entropy,
                r.dissipation,
                r.phi_sup,
                r.phi_inf_sup,
                r.h1_dist_sq,
                r.grad_sup,
            ]);
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, TraceError> {
        let mut rd = csv::Reader::from_reader(input);
        let head: Vec<String> = rd.headers()?.iter().map(String::from).collect();
        if head.len() < 10 || head[0] != "time" {
            return Err(TraceError::Format("unexpected header".into()));
        }
        let k = head.len() - 10;
        let species: Vec<String> = head[1..=k]
            .iter()
            .map(|h| h.strip_prefix("l1_").unwrap_or(h).to_string())
            .collect();
        if header(&species) != head {
            return Err(TraceError::Format("unexpected header".into()));
        }
        let mut records = Vec::new();
        for (line, row) in rd.records().enumerate() {
            let row = row?;
            let v: Vec<f64> = row
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| TraceError::Format(format!("row {}: {e}", line + 2)))?;
            if v.len() != head.len() {
                return Err(TraceError::Format(format!("row {} has {} fields", line + 2, v.len())));
            }
            records.push(TraceRecord {
                time: v[0],
                species_l1: v[1..=k].to_vec(),
                dist_l1: v[k + 1],
                l2_dist_sq: v[k + 2],
                charge: v[k + 3],
                rel_entropy: v[k + 4],
                dissipation: v[k + 5],
                phi_sup: v[k + 6],
                phi_inf_sup: v[k + 7],
                h1_dist_sq: v[k + 8],
                grad_sup: v[k + 9],
            });
        }
        Ok(Trace { species, records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::kinetics::presets;
    use crate::rdd::StepControl;
    use crate::scaling::ModelKind;

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = RadialGrid::uniform(0.5, 10).unwrap();
        let net = presets::pair_annihilation(1.0, [1.2, 0.8]);
        let p = RddProblem::new(grid, net, ModelKind::FullRdd, 1.0, 1.0, vec![1.0, 1.0]).unwrap();
        // neutral overall, but not pointwise
        let g: Vec<f64> = p.grid().centers().iter().map(|r| (-(r / 0.1f64).powi(2)).exp()).collect();
        let gm = p.grid().mean(&g).unwrap();
        let u: Vec<f64> = g.iter().flat_map(|v| [0.6 + v, 0.6 + gm]).collect();
        let init = p.state(0.0, u).unwrap();
        let eq = p.equilibrium(&init).unwrap();
        let run = p.integrate(init, &[0.0, 0.01, 0.03, 0.1], &StepControl::default()).unwrap();
        let trace = build_trace(&p, &eq, &run.records, 0.2).unwrap();
        assert!(trace.records.windows(2).all(|w| w[1].rel_entropy < w[0].rel_entropy));
        assert!(trace.records.iter().all(|r| r.dissipation > 0.0));
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let back = Trace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, trace);
        assert!(String::from_utf8(buf).unwrap().starts_with("time,l1_e,l1_h,dist_l1"));
    }

    #[test]
    fn rejects_foreign_csv() {
        assert!(Trace::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
