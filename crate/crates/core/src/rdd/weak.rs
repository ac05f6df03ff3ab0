use super::{RddProblem, SolverError, SystemState};
use crate::kinetics::Recombination;
use crate::scalar::Real;

/// Residual of the discrete weak form around the middle of three
/// consecutive states,
///
/// ```text
/// sum_i V_i phi_i du_i/dt - sum_faces F (phi_{i+1} - phi_i) + sum_i V_i phi_i r(u_i)
/// ```
///
/// with `du/dt` by central differences and fluxes at the middle state.
/// Returns the largest absolute value over species. For `phi = 1` the flux
/// sum drops and this is `|d/dt int u + int r(u)|`.
pub fn weak_residual<T: Real>(
    problem: &RddProblem<T>,
    states: &[SystemState<T>],
    test_function: &[T],
) -> Result<T, SolverError> {
    if states.len() < 3 {
        return Err(SolverError::Invalid(
            "weak residual needs three consecutive states".into(),
        ));
    }
    let n = problem.cells();
    let k = problem.species_count();
    problem.grid().check_len(test_function.len())?;
    let mid = states.len() / 2;
    let (a, b, c) = (&states[mid - 1], &states[mid], &states[mid + 1]);
    let span = c.time - a.time;
    if !(span > T::zero()) {
        return Err(SolverError::Invalid("states must be time-ordered".into()));
    }
    let vols = problem.grid().volumes();
    let areas = problem.grid().face_areas();
    let mut res = vec![T::zero(); k];
    for i in 0..n {
        for j in 0..k {
            let du = (c.densities[i * k + j] - a.densities[i * k + j]) / span;
            res[j] += vols[i] * test_function[i] * du;
        }
    }
    if problem.model().has_diffusion() || problem.model().has_drift() {
        let fc = problem.face_coefficients(&b.potential.values);
        let u = &b.densities;
        for f in 0..n.saturating_sub(1) {
            let dphi = test_function[f + 1] - test_function[f];
            for j in 0..k {
                let flux = areas[f + 1]
                    * (fc.alpha[f * k + j] * u[f * k + j] - fc.beta[f * k + j] * u[(f + 1) * k + j]);
                res[j] -= flux * dphi;
            }
        }
    }
    if problem.model().has_reaction() {
        let mut r = vec![T::zero(); k];
        for i in 0..n {
            problem
                .network()
                .recombination_into(&b.densities[i * k..(i + 1) * k], &mut r);
            for j in 0..k {
                res[j] += vols[i] * test_function[i] * r[j];
            }
        }
    }
    Ok(res.into_iter().fold(T::zero(), |acc, v| acc.max(v.abs())))
}
