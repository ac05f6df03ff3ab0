use super::{RddProblem, SolverError, SystemState, NEGATIVE_TOLERANCE};
use crate::scalar::Real;

/// Adaptive step-size control.
#[derive(Debug, Clone, PartialEq)]
pub struct StepControl<T> {
    pub rtol: T,
    pub atol: T,
    /// First trial step; `None` picks `1e-4` of the first output interval.
    pub initial_step: Option<T>,
    pub max_step: Option<T>,
    pub max_steps: usize,
    pub safety: T,
}

impl<T: Real> Default for StepControl<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-6),
            atol: T::lit(1e-10),
            initial_step: None,
            max_step: None,
            max_steps: 1_000_000,
            safety: T::lit(0.8),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<T> {
    pub state: SystemState<T>,
    /// Weighted max-norm of the embedded error estimate (accepted if <= 1).
    pub error_norm: T,
    /// Step size suggested for the next step.
    pub suggested: T,
}

/// States at the requested output times plus the accepted step times, which
/// [`RddProblem::replay`] can reuse.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<T> {
    pub records: Vec<SystemState<T>>,
    pub schedule: Vec<T>,
    pub rejected: usize,
}

struct Attempt<T> {
    densities: Vec<T>,
    error: Vec<T>,
}

const MAX_GROWTH: f64 = 5.0;
const MIN_SHRINK: f64 = 0.2;

impl<T: Real> RddProblem<T> {
    fn stage_potential(&self, time: T, u: &[T]) -> Result<Vec<T>, SolverError> {
        self.potential(u)
            .map(|p| p.values)
            .map_err(|source| SolverError::Poisson {
                time: time.to_f64_lossy(),
                source,
            })
    }

    /// One Rosenbrock step (Shampine-Reichelt ode23s) of size `h`.
    fn attempt(&self, state: &SystemState<T>, h: T) -> Result<Attempt<T>, SolverError> {
        let y = &state.densities;
        let n = y.len();
        let two = T::lit(2.0);
        let gamma = T::one() / (two + two.sqrt());
        let e32 = T::lit(6.0) + two.sqrt();
        let psi0 = &state.potential.values;
        let w = self
            .shifted_jacobian(y, psi0, h * gamma)
            .factor()
            .ok_or_else(|| SolverError::StepRejected {
                time: state.time.to_f64_lossy(),
                suggested: (h * T::lit(0.5)).to_f64_lossy(),
            })?;

        let mut f0 = vec![T::zero(); n];
        self.rhs(y, psi0, &mut f0);
        let mut k1 = f0.clone();
        w.solve_in_place(&mut k1);

        let half = T::lit(0.5);
        let y1: Vec<T> = y.iter().zip(&k1).map(|(a, b)| *a + half * h * *b).collect();
        let psi1 = self.stage_potential(state.time + half * h, &y1)?;
        let mut f1 = vec![T::zero(); n];
        self.rhs(&y1, &psi1, &mut f1);
        let mut k2: Vec<T> = f1.iter().zip(&k1).map(|(a, b)| *a - *b).collect();
        w.solve_in_place(&mut k2);
        for (a, b) in k2.iter_mut().zip(&k1) {
            *a += *b;
        }

        let ynew: Vec<T> = y.iter().zip(&k2).map(|(a, b)| *a + h * *b).collect();
        let psi2 = self.stage_potential(state.time + h, &ynew)?;
        let mut f2 = vec![T::zero(); n];
        self.rhs(&ynew, &psi2, &mut f2);
        let mut k3: Vec<T> = (0..n)
            .map(|i| f2[i] - e32 * (k2[i] - f1[i]) - two * (k1[i] - f0[i]))
            .collect();
        w.solve_in_place(&mut k3);
        let sixth = h / T::lit(6.0);
        let error = (0..n).map(|i| sixth * (k1[i] - two * k2[i] + k3[i])).collect();
        Ok(Attempt {
            densities: ynew,
            error,
        })
    }

    fn error_norm(&self, old: &[T], new: &[T], err: &[T], control: &StepControl<T>) -> T {
        old.iter()
            .zip(new)
            .zip(err)
            .fold(T::zero(), |acc, ((a, b), e)| {
                let scale = control.atol + control.rtol * a.abs().max(b.abs());
                acc.max(e.abs() / scale)
            })
    }

    fn check_positivity(&self, time: T, u: &[T]) -> Result<(), SolverError> {
        let scale = u.iter().fold(T::one(), |a, v| a.max(v.abs()));
        let floor = -T::lit(NEGATIVE_TOLERANCE) * scale;
        let k = self.species_count();
        match u.iter().position(|v| *v < floor || v.is_nan()) {
            None => Ok(()),
            Some(idx) => Err(SolverError::PositivityFailure {
                time: time.to_f64_lossy(),
                cell: idx / k,
                species: idx % k,
                value: u[idx].to_f64_lossy(),
            }),
        }
    }

    fn next_step(&self, h: T, err: T, control: &StepControl<T>) -> T {
        let factor = if err > T::zero() {
            control.safety * err.powf(-T::one() / T::lit(3.0))
        } else {
            T::lit(MAX_GROWTH)
        };
        let mut next = h * factor.min(T::lit(MAX_GROWTH)).max(T::lit(MIN_SHRINK));
        if let Some(max) = control.max_step {
            next = next.min(max);
        }
        next
    }

    /// Attempts one step of size `dt`. Fails with [`SolverError::StepRejected`]
    /// (carrying a smaller step) when the error estimate exceeds the
    /// tolerance, and with [`SolverError::PositivityFailure`] when a density
    /// would turn negative.
    pub fn step(
        &self,
        state: &SystemState<T>,
        dt: T,
        control: &StepControl<T>,
    ) -> Result<StepReport<T>, SolverError> {
        if !(dt > T::zero()) {
            return Err(SolverError::Invalid("dt must be positive".into()));
        }
        let a = self.attempt(state, dt)?;
        let time = state.time + dt;
        self.check_positivity(time, &a.densities)?;
        let err = self.error_norm(&state.densities, &a.densities, &a.error, control);
        let suggested = self.next_step(dt, err, control);
        if !(err <= T::one()) {
            return Err(SolverError::StepRejected {
                time: state.time.to_f64_lossy(),
                suggested: suggested.min(dt * T::lit(0.5)).to_f64_lossy(),
            });
        }
        Ok(StepReport {
            state: self.state(time, a.densities)?,
            error_norm: err,
            suggested,
        })
    }

    /// Adaptive integration through the sorted `outputs`, landing exactly
    /// on each of them. An output equal to the initial time records the
    /// initial state.
    pub fn integrate(
        &self,
        initial: SystemState<T>,
        outputs: &[T],
        control: &StepControl<T>,
    ) -> Result<RunOutput<T>, SolverError> {
        check_outputs(initial.time, outputs)?;
        let mut records = Vec::with_capacity(outputs.len());
        let mut schedule = Vec::new();
        let mut rejected = 0;
        let mut state = initial;
        let first_span = outputs
            .iter()
            .find(|t| **t > state.time)
            .map(|t| *t - state.time)
            .unwrap_or(T::one());
        let mut h = control
            .initial_step
            .unwrap_or(first_span * T::lit(1e-4));
        let mut steps = 0;
        for &target in outputs {
            while state.time < target {
                if steps == control.max_steps {
                    return Err(SolverError::StepBudget(control.max_steps));
                }
                let remaining = target - state.time;
                // avoid a sliver step just before the output time
                let t_new = if h >= remaining * T::lit(0.999) {
                    target
                } else {
                    state.time + h
                };
                // the step actually taken is the difference of representable
                // times, so a replay of the schedule repeats it bit for bit
                let dt = t_new - state.time;
                let min_step = T::lit(1e-14) * (T::one() + state.time.abs()).max(target.abs());
                match self.step(&state, dt, control) {
                    Ok(rep) => {
                        steps += 1;
                        state = rep.state;
                        state.time = t_new;
                        schedule.push(state.time);
                        h = rep.suggested;
                    }
                    Err(SolverError::StepRejected { suggested, .. }) => {
                        rejected += 1;
                        h = T::lit(suggested);
                        if h < min_step {
                            return Err(SolverError::StepRejected {
                                time: state.time.to_f64_lossy(),
                                suggested,
                            });
                        }
                    }
                    Err(e @ SolverError::PositivityFailure { .. }) => {
                        rejected += 1;
                        h = dt * T::lit(0.25);
                        if h < min_step {
                            return Err(e);
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            records.push(state.clone());
        }
        Ok(RunOutput {
            records,
            schedule,
            rejected,
        })
    }

    /// Re-runs a step schedule without error control, so runs of related
    /// problems can be compared step for step.
    pub fn replay(
        &self,
        initial: SystemState<T>,
        schedule: &[T],
        outputs: &[T],
    ) -> Result<RunOutput<T>, SolverError> {
        check_outputs(initial.time, outputs)?;
        let mut records = Vec::with_capacity(outputs.len());
        let mut state = initial;
        let mut out = outputs.iter().peekable();
        while let Some(&&t) = out.peek() {
            if t <= state.time {
                records.push(state.clone());
                out.next();
            } else {
                break;
            }
        }
        for &t in schedule {
            if t <= state.time {
                return Err(SolverError::Invalid("schedule must increase".into()));
            }
            let a = self.attempt(&state, t - state.time)?;
            self.check_positivity(t, &a.densities)?;
            state = self.state(t, a.densities)?;
            while let Some(&&o) = out.peek() {
                if o <= state.time {
                    records.push(state.clone());
                    out.next();
                } else {
                    break;
                }
            }
        }
        if records.len() != outputs.len() {
            return Err(SolverError::Invalid(
                "schedule ends before the last output time".into(),
            ));
        }
        Ok(RunOutput {
            records,
            schedule: schedule.to_vec(),
            rejected: 0,
        })
    }
}

fn check_outputs<T: Real>(start: T, outputs: &[T]) -> Result<(), SolverError> {
    if outputs.iter().any(|t| !t.is_finite() || *t < start) {
        return Err(SolverError::Invalid(
            "output times must be finite and not before the initial time".into(),
        ));
    }
    if outputs.windows(2).any(|w| w[1] < w[0]) {
        return Err(SolverError::Invalid("output times must be sorted".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::kinetics::presets;
    use crate::scaling::ModelKind;

    fn annihilation(cells: usize) -> RddProblem<f64> {
        let grid = RadialGrid::uniform(0.6, cells).unwrap();
        // c tiny and k = c1 c2: the backward term is negligible, r = u1 u2
        let net = presets::pair_annihilation(1e-16, [1e-8, 1e-8]);
        RddProblem::new(grid, net, ModelKind::Kinetic, 0.0, 0.0, vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn kinetic_annihilation_matches_closed_form() {
        let p = annihilation(1);
        let init = p.uniform_state(&[1.0, 1.0]).unwrap();
        let outputs: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let control = StepControl {
            rtol: 1e-9,
            atol: 1e-13,
            ..StepControl::default()
        };
        let run = p.integrate(init, &outputs, &control).unwrap();
        for rec in &run.records {
            let exact = 1.0 / (1.0 + rec.time);
            for v in &rec.densities {
                assert!(((v - exact) / exact).abs() < 1e-6, "t={} {v} vs {exact}", rec.time);
            }
        }
        assert_eq!(run.records.last().unwrap().time, 10.0);
    }

    #[test]
    fn zero_duration_run_returns_initial_record() {
        let p = annihilation(1);
        let init = p.uniform_state(&[1.0, 1.0]).unwrap();
        let run = p.integrate(init.clone(), &[0.0], &StepControl::default()).unwrap();
        assert_eq!(run.records, vec![init]);
        assert!(run.schedule.is_empty());
    }

    #[test]
    fn uniform_state_is_fixed_for_diffusion() {
        let grid = RadialGrid::uniform(1.0, 16).unwrap();
        let net = presets::pair_annihilation(1.0, [1.0, 1.0]);
        let p = RddProblem::new(grid, net, ModelKind::Diffusive, 1.0, 0.0, vec![1.0, 0.5]).unwrap();
        let init = p.uniform_state(&[0.3, 2.0]).unwrap();
        for dt in [1e-3f64, 1.0, 1e3] {
            let rep = p.step(&init, dt, &StepControl::default()).unwrap();
            for (a, b) in rep.state.densities.iter().zip(&init.densities) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn oversized_step_is_rejected_with_suggestion() {
        let p = annihilation(1);
        let init = p.uniform_state(&[1.0, 1.0]).unwrap();
        let tight = StepControl {
            rtol: 1e-10,
            atol: 1e-14,
            ..StepControl::default()
        };
        match p.step(&init, 2.0, &tight) {
            Err(SolverError::StepRejected { suggested, .. }) => assert!(suggested < 2.0),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn replay_reproduces_adaptive_run() {
        let grid = RadialGrid::uniform(0.5, 10).unwrap();
        let net = presets::pair_annihilation(1.0, [1.2, 0.8]);
        let p = RddProblem::new(grid, net, ModelKind::FullRdd, 1.0, 1.0, vec![1.0, 0.5]).unwrap();
        let u: Vec<f64> = (0..10)
            .flat_map(|i| {
                let g = (-(i as f64 / 3.0).powi(2)).exp();
                [0.5 + g, 0.5 + g]
            })
            .collect();
        let init = p.state(0.0, u).unwrap();
        let outputs = [0.0, 0.1, 0.5];
        let run = p.integrate(init.clone(), &outputs, &StepControl::default()).unwrap();
        let again = p.replay(init, &run.schedule, &outputs).unwrap();
        assert_eq!(run.records, again.records);
    }
}
