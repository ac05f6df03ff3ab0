//! Decay-time constants, their verification along traces, and fits of
//! simulated decays.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::solve_dense;
use crate::rdd::{RddProblem, SystemState};
use crate::scalar::Real;
use crate::scaling::{MaterialParams, ModelKind};
use crate::trace::{Trace, TraceRecord};

/// Slack on the right-hand side of the decay estimate.
pub const DEFAULT_TOLERANCE_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecayError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("fit did not converge: {reason} (after {iterations} iterations, rms {rms:e})")]
    FitNonConvergence {
        reason: String,
        iterations: usize,
        rms: f64,
    },
}

/// Which argument of the max in `C1^-1` is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Mobility,
    Creation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants<T> {
    pub c1: T,
    pub c2: T,
    /// `C1^-1`.
    pub tau_estimate: T,
    pub branch: Branch,
    /// `C1^-1` with the max replaced by the min. Exploratory only.
    pub min_branch_tau: T,
}

/// Rate `C1` and prefactor `C2` of
/// `|n - n_inf|_1^2 + |phi - phi_inf|_{H^1}^2 <= C2 G0 exp(-C1 t)`:
///
/// ```text
/// C1^-1 = 1/2 e^{2 Phi} max{(T/m) e^{2 Phi}, 1/k0} (1 + L e^{2 Phi})
/// C2    = 3 e^{2 Phi} + G0 / 2 + 2 (1 + L)
/// ```
///
/// `k0 = None` (no creation term) drops `1/k0` from the max.
pub fn decay_constants<T: Real>(
    phi_inf_sup: T,
    t_over_m: T,
    k0: Option<T>,
    poincare: T,
    g0: T,
) -> Result<DecayConstants<T>, DecayError> {
    let bad = |what: &str| Err(DecayError::InvalidInput(what.into()));
    if !(phi_inf_sup >= T::zero()) || !phi_inf_sup.is_finite() {
        return bad("Phi_inf must be finite and non-negative");
    }
    if !(t_over_m > T::zero()) || !(poincare > T::zero()) || !(g0 >= T::zero()) {
        return bad("T/m and the Poincare constant must be positive, G0 non-negative");
    }
    if let Some(k) = k0 {
        if !(k > T::zero()) {
            return bad("k0 must be positive");
        }
    }
    let e2 = (T::lit(2.0) * phi_inf_sup).exp();
    let half = T::lit(0.5);
    let mobility = t_over_m * e2;
    let (wide, narrow, branch) = match k0 {
        Some(k) if T::one() / k > mobility => (T::one() / k, mobility, Branch::Creation),
        Some(k) => (mobility, T::one() / k, Branch::Mobility),
        None => (mobility, mobility, Branch::Mobility),
    };
    let tail = T::one() + poincare * e2;
    let tau = half * e2 * wide * tail;
    Ok(DecayConstants {
        c1: T::one() / tau,
        c2: T::lit(3.0) * e2 + half * g0 + T::lit(2.0) * (T::one() + poincare),
        tau_estimate: tau,
        branch,
        min_branch_tau: half * e2 * narrow * tail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCheck {
    pub verdicts: Vec<bool>,
    pub holds: bool,
    pub first_violation: Option<usize>,
    /// Largest `LHS / (C2 G0 exp(-C1 t))`.
    pub worst_ratio: f64,
}

/// Checks `LHS <= C2 G0 exp(-C1 t) factor` at every record.
pub fn verify_decay_estimate<T: Real>(
    records: &[TraceRecord<T>],
    c1: T,
    c2: T,
    g0: T,
    factor: T,
) -> EstimateCheck {
    let mut verdicts = Vec::with_capacity(records.len());
    let mut worst = 0.0f64;
    for r in records {
        let lhs = r.decay_lhs();
        let rhs = c2 * g0 * (-c1 * r.time).exp();
        verdicts.push(lhs <= rhs * factor);
        let ratio = if rhs > T::zero() {
            (lhs / rhs).to_f64_lossy()
        } else if lhs > T::zero() {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(ratio);
    }
    let first_violation = verdicts.iter().position(|v| !v);
    EstimateCheck {
        holds: first_violation.is_none(),
        verdicts,
        first_violation,
        worst_ratio: worst,
    }
}

/// `L / (2 delta)`, with `delta = (k_B theta / e) mu`.
pub fn diffusive_decay_bound<T: Real>(params: &MaterialParams<T>, poincare: T) -> T {
    poincare / (T::lit(2.0) * params.delta())
}

/// `1/2 min{lambda1, K2 H1 / K1}`; the decay time is its inverse.
pub fn rd_decay_constant<T: Real>(lambda1: T, k1: T, k2: T, h1: T) -> T {
    T::lit(0.5) * lambda1.min(k2 * h1 / k1)
}

/// First time the series falls to `values[0] / e`, interpolating `log v`
/// linearly between samples. `None` if it never does or starts at zero.
pub fn e_folding_time(times: &[f64], values: &[f64]) -> Option<f64> {
    let v0 = *values.first()?;
    if !(v0 > 0.0) {
        return None;
    }
    let target = v0 / std::f64::consts::E;
    let i = values.iter().position(|&v| v <= target)?;
    if i == 0 {
        return Some(times[0]);
    }
    let (t0, t1) = (times[i - 1], times[i]);
    let (a, b) = (values[i - 1], values[i]);
    if !(b > 0.0) {
        return Some(t1);
    }
    let s = (a.ln() - target.ln()) / (a.ln() - b.ln());
    Some(t0 + s * (t1 - t0))
}

/// Decay rate of the series from a log-linear fit over the later half of
/// the samples above `floor * values[0]`.
pub fn asymptotic_rate(times: &[f64], values: &[f64], floor: f64) -> Option<f64> {
    let v0 = *values.first()?;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > floor * v0 && v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let tail = &pts[pts.len() / 2..];
    let (_, slope) = line_fit(tail)?;
    Some(-slope)
}

/// Least-squares line `y = a + b t`; `None` for degenerate abscissae.
fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let b = sxy / sxx;
    Some((ym - b * tm, b))
}

/// `y = A_f exp(-t / tau_f) + A_s exp(-t / tau_s)` with `tau_f <= tau_s`.
/// `single` marks the one-exponential fallback, reported as
/// `tau_f = tau_s`, `A_s = 0`. `rms` is of the relative residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiexpFit {
    pub a_fast: f64,
    pub tau_fast: f64,
    pub a_slow: f64,
    pub tau_slow: f64,
    pub rms: f64,
    pub single: bool,
    pub iterations: usize,
}

impl BiexpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.a_fast * (-t / self.tau_fast).exp() + self.a_slow * (-t / self.tau_slow).exp()
    }
}

struct Lm {
    params: Vec<f64>,
    cost: f64,
    iterations: usize,
}

/// Exponential sum in log parameters `[ln A_1, ln tau_1, ...]`; residuals
/// relative to the data.
fn exp_sum_residuals(p: &[f64], t: &[f64], y: &[f64], r: &mut [f64], jac: &mut [f64]) {
    let np = p.len();
    for i in 0..t.len() {
        let mut model = 0.0;
        for term in 0..np / 2 {
            let (a, tau) = (p[2 * term].exp(), p[2 * term + 1].exp());
            let e = a * (-t[i] / tau).exp();
            model += e;
            jac[i * np + 2 * term] = e / y[i];
            jac[i * np + 2 * term + 1] = e * t[i] / tau / y[i];
        }
        r[i] = model / y[i] - 1.0;
    }
}

fn levenberg_marquardt(p0: Vec<f64>, t: &[f64], y: &[f64]) -> Result<Lm, DecayError> {
    const MAX_ITER: usize = 2000;
    let np = p0.len();
    let m = t.len();
    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * np];
    let mut p = p0;
    exp_sum_residuals(&p, t, y, &mut r, &mut jac);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut mu = 1e-3;
    let mut trial_r = vec![0.0; m];
    let mut trial_j = vec![0.0; m * np];
    for it in 1..=MAX_ITER {
        let mut jtj = vec![0.0; np * np];
        let mut g = vec![0.0; np];
        for i in 0..m {
            let row = &jac[i * np..(i + 1) * np];
            for a in 0..np {
                g[a] -= row[a] * r[i];
                for b in 0..np {
                    jtj[a * np + b] += row[a] * row[b];
                }
            }
        }
        let mut improved = false;
        while mu < 1e16 {
            let mut lhs = jtj.clone();
            for a in 0..np {
                lhs[a * np + a] += mu * jtj[a * np + a].max(1e-12);
            }
            let Some(step) = solve_dense(np, lhs, g.clone()) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            exp_sum_residuals(&trial, t, y, &mut trial_r, &mut trial_j);
            let c: f64 = trial_r.iter().map(|v| v * v).sum();
            if c.is_finite() && c <= cost {
                let small = step.iter().zip(&p).all(|(s, x)| s.abs() <= 1e-12 * (1.0 + x.abs()));
                let stalled = cost - c <= 1e-15 * cost;
                p = trial;
                std::mem::swap(&mut r, &mut trial_r);
                std::mem::swap(&mut jac, &mut trial_j);
                cost = c;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                if small || stalled || cost < 1e-28 {
                    return Ok(Lm {
                        params: p,
                        cost,
                        iterations: it,
                    });
                }
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            // no descent direction left: a (local) minimum
            return Ok(Lm {
                params: p,
                cost,
                iterations: it,
            });
        }
    }
    Err(DecayError::FitNonConvergence {
        reason: "iteration limit".into(),
        iterations: MAX_ITER,
        rms: (cost / m as f64).sqrt(),
    })
}

/// Fits a fast plus slow exponential to `(t, y)`.
///
/// The slow component starts from a log-linear fit of the tail, the fast
/// one from a log-linear fit of the head residual; both are then refined
/// together by damped Gauss-Newton on relative residuals. Degenerate
/// results (`min(A)/max(A) < 1e-6` or `tau_s / tau_f < 1.2`) fall back to a
/// single exponential.
pub fn fit_biexponential(t: &[f64], y: &[f64]) -> Result<BiexpFit, DecayError> {
    let n = t.len();
    if n < 8 || y.len() != n {
        return Err(DecayError::InvalidInput(format!(
            "need at least 8 (t, y) pairs, got {} and {}",
            n,
            y.len()
        )));
    }
    if y.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(DecayError::InvalidInput("y must be positive".into()));
    }
    if t.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(DecayError::InvalidInput("t must increase strictly".into()));
    }
    let no_decay = |reason: &str| DecayError::FitNonConvergence {
        reason: reason.into(),
        iterations: 0,
        rms: 0.0,
    };
    let logs: Vec<(f64, f64)> = t.iter().zip(y).map(|(&a, &b)| (a, b.ln())).collect();
    let tail_len = (n * 2 / 5).max(3);
    let (ls, slope) = line_fit(&logs[n - tail_len..]).ok_or_else(|| no_decay("degenerate tail"))?;
    let (_, overall) = line_fit(&logs).ok_or_else(|| no_decay("degenerate data"))?;
    if !(slope < 0.0) || !(overall < 0.0) {
        return Err(no_decay("no decay: tau diverges"));
    }
    let tau_s = -1.0 / slope;
    let a_s = ls.exp();

    // head residual after removing the slow part
    let head: Vec<(f64, f64)> = t[..n - tail_len]
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| (ti, yi - a_s * (-ti / tau_s).exp()))
        .take_while(|(_, d)| *d > 0.0)
        .map(|(ti, d)| (ti, d.ln()))
        .collect();
    let (a_f, tau_f) = match line_fit(&head) {
        Some((lf, sf)) if head.len() >= 3 && sf < 0.0 && -1.0 / sf < tau_s => (lf.exp(), -1.0 / sf),
        _ => (0.1 * a_s, 0.2 * tau_s),
    };

    let single = || -> Result<BiexpFit, DecayError> {
        let (l, s) = line_fit(&logs).ok_or_else(|| no_decay("degenerate data"))?;
        let lm = levenberg_marquardt(vec![l, (-1.0 / s).ln()], t, y)?;
        let (a, tau) = (lm.params[0].exp(), lm.params[1].exp());
        Ok(BiexpFit {
            a_fast: a,
            tau_fast: tau,
            a_slow: 0.0,
            tau_slow: tau,
            rms: (lm.cost / n as f64).sqrt(),
            single: true,
            iterations: lm.iterations,
        })
    };

    let p0 = vec![a_f.ln(), tau_f.ln(), a_s.ln(), tau_s.ln()];
    let lm = match levenberg_marquardt(p0, t, y) {
        Ok(lm) => lm,
        Err(_) => return single(),
    };
    let mut terms = [
        (lm.params[0].exp(), lm.params[1].exp()),
        (lm.params[2].exp(), lm.params[3].exp()),
    ];
    if !terms.iter().all(|(a, tau)| a.is_finite() && tau.is_finite()) {
        return single();
    }
    terms.sort_by(|a, b| a.1.total_cmp(&b.1));
    let [(a_f, tau_f), (a_s, tau_s)] = terms;
    if a_f.min(a_s) / a_f.max(a_s) < 1e-6 || tau_s / tau_f < 1.2 {
        return single();
    }
    Ok(BiexpFit {
        a_fast: a_f,
        tau_fast: tau_f,
        a_slow: a_s,
        tau_slow: tau_s,
        rms: (lm.cost / n as f64).sqrt(),
        single: false,
        iterations: lm.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Preconditions of the explicit estimate on the reference and
/// equilibrium densities: `c_j <= e^Phi`, `n_inf_j <= e^{2 Phi}`,
/// `1 / n_inf_j <= e^{2 Phi}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub reference_bound: bool,
    pub upper_bound: bool,
    pub lower_bound: bool,
    /// `"in hypothesis"`, `"out of hypothesis"` or `"out of scope"`.
    pub label: String,
}

pub fn check_hypotheses(phi_inf_sup: f64, reference: &[f64], n_inf: &[f64]) -> HypothesisCheck {
    let e1 = phi_inf_sup.exp();
    let e2 = e1 * e1;
    let reference_bound = reference.iter().all(|&c| c <= e1);
    let upper_bound = n_inf.iter().all(|&v| v <= e2);
    let lower_bound = n_inf.iter().all(|&v| v > 0.0 && 1.0 / v <= e2);
    let label = if reference_bound && upper_bound && lower_bound {
        "in hypothesis"
    } else {
        "out of hypothesis"
    };
    HypothesisCheck {
        reference_bound,
        upper_bound,
        lower_bound,
        label: label.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusiveCheck {
    /// `L / (2 d min M*)` in run time units.
    pub bound: f64,
    /// e-folding time of `|u - u_inf|_2^2`, the quantity the bound controls.
    pub l2_e_folding: Option<f64>,
    /// e-folding time of `|u - u_inf|_1`, for reference.
    pub l1_e_folding: Option<f64>,
    pub verdict: Verdict,
}

/// Everything the analysis says about one run. Times and rates are in the
/// run's (dimensionless) time unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub model: ModelKind,
    pub species: usize,
    pub phi_inf_sup: Option<f64>,
    /// `T/m` read as `1 / (m min M*)`.
    pub t_over_m: Option<f64>,
    /// `|r(0)|_inf`; `None` when the network has no creation term.
    pub k0: Option<f64>,
    pub poincare: f64,
    pub g0: f64,
    pub constants: Option<DecayConstants<f64>>,
    pub hypotheses: Option<HypothesisCheck>,
    pub estimate: Option<EstimateCheck>,
    pub diffusive: Option<DiffusiveCheck>,
    pub fit: Option<BiexpFit>,
    pub fit_error: Option<String>,
    pub fast_rate_at_least_c1: Option<bool>,
    /// Late-time decay rate of the relative entropy.
    pub entropy_rate: Option<f64>,
    pub entropy_rate_at_least_c1: Option<bool>,
    pub bound_satisfied: Verdict,
    pub notes: Vec<String>,
}

/// Runs every applicable check on a finished trace.
///
/// The explicit estimate is evaluated for two-species networks with
/// reactions; the diffusive bound for the DIFFUSIVE model.
pub fn decay_report(problem: &RddProblem<f64>, equilibrium: &SystemState<f64>, trace: &Trace<f64>) -> DecayReport {
    let model = problem.model();
    let k = problem.species_count();
    let mut notes = Vec::new();
    let poincare = problem.grid().poincare_constant();
    let times: Vec<f64> = trace.records.iter().map(|r| r.time).collect();
    let g: Vec<f64> = trace.records.iter().map(|r| r.rel_entropy).collect();
    let g0 = g.first().copied().unwrap_or(0.0);
    let phi_inf_sup = trace.records.first().map(|r| r.phi_inf_sup).filter(|v| v.is_finite());
    let min_mob = problem.mobility().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let t_over_m = (problem.m() > 0.0 && min_mob > 0.0).then(|| 1.0 / (problem.m() * min_mob));
    let k0 = problem.network().zero_state_rate();

    let mut report = DecayReport {
        model,
        species: k,
        phi_inf_sup,
        t_over_m,
        k0,
        poincare,
        g0,
        constants: None,
        hypotheses: None,
        estimate: None,
        diffusive: None,
        fit: None,
        fit_error: None,
        fast_rate_at_least_c1: None,
        entropy_rate: asymptotic_rate(&times, &g, 1e-12),
        entropy_rate_at_least_c1: None,
        bound_satisfied: Verdict::NotApplicable,
        notes: Vec::new(),
    };

    let dist: Vec<f64> = trace.records.iter().map(|r| r.dist_l1).collect();
    let l2_dist_sq: Vec<f64> = trace.records.iter().map(|r| r.l2_dist_sq).collect();
    let keep: Vec<usize> = (0..dist.len())
        .filter(|&i| dist[i] > 1e-10 * dist[0].max(f64::MIN_POSITIVE))
        .collect();
    if keep.len() >= 8 {
        let ft: Vec<f64> = keep.iter().map(|&i| times[i]).collect();
        let fy: Vec<f64> = keep.iter().map(|&i| dist[i]).collect();
        match fit_biexponential(&ft, &fy) {
            Ok(f) => report.fit = Some(f),
            Err(e) => report.fit_error = Some(e.to_string()),
        }
    } else {
        report.fit_error = Some("fewer than 8 records with a resolvable distance".into());
    }

    let mut verdicts = Vec::new();
    if k == 2 && model.has_reaction() {
        match (phi_inf_sup, t_over_m) {
            (Some(phi), Some(tm)) => match decay_constants(phi, tm, k0, poincare, g0) {
                Ok(c) => {
                    let n_inf = &equilibrium.densities[..k];
                    report.hypotheses = Some(check_hypotheses(phi, problem.network().reference(), n_inf));
                    let check = verify_decay_estimate(&trace.records, c.c1, c.c2, g0, DEFAULT_TOLERANCE_FACTOR);
                    verdicts.push(check.holds);
                    report.estimate = Some(check);
                    report.fast_rate_at_least_c1 = report.fit.as_ref().map(|f| 1.0 / f.tau_fast >= c.c1);
                    report.entropy_rate_at_least_c1 = report.entropy_rate.map(|r| r >= c.c1);
                    report.constants = Some(c);
                }
                Err(e) => notes.push(format!("decay constants: {e}")),
            },
            _ => notes.push("decay constants need Phi_inf and a positive drift coefficient".into()),
        }
    } else {
        notes.push(format!(
            "explicit estimate applies to two-species networks with reactions (out of scope for {k} species, {model})"
        ));
    }
    if model == ModelKind::Diffusive {
        let bound = poincare / (2.0 * problem.d() * min_mob);
        let l2 = e_folding_time(&times, &l2_dist_sq);
        let l1 = e_folding_time(&times, &dist);
        let verdict = match l2 {
            Some(t) => Verdict::from(t <= bound * DEFAULT_TOLERANCE_FACTOR),
            None if l2_dist_sq.first().is_none_or(|v| *v == 0.0) => Verdict::NotApplicable,
            None => Verdict::Fail,
        };
        if verdict != Verdict::NotApplicable {
            verdicts.push(verdict == Verdict::Pass);
        }
        report.diffusive = Some(DiffusiveCheck {
            bound,
            l2_e_folding: l2,
            l1_e_folding: l1,
            verdict,
        });
    }
    if !verdicts.is_empty() {
        report.bound_satisfied = Verdict::from(verdicts.iter().all(|v| *v));
    }
    report.notes = notes;
    report
}
