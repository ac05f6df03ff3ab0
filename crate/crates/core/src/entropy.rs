//! Entropy functionals and dissipation.
//!
//! Densities are cell-major with `k` species per cell. Energies are in units
//! of `theta k_B`; `x log x` is continued by zero, and densities below
//! [`DENSITY_FLOOR`] contribute no logarithmic term.

use thiserror::Error;

use crate::grid::{GridError, RadialGrid};
use crate::kinetics::{log_mean, KineticsError, ReactionNetwork};
use crate::scalar::Real;

pub const DENSITY_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error("reference density must be positive (cell {cell}, species {species})")]
    Domain { cell: usize, species: usize },
    #[error("need at least three records, got {0}")]
    TooFewRecords(usize),
    #[error("record times must increase")]
    Unordered,
    #[error("weights: {0}")]
    Weights(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

fn check_field<T: Real>(grid: &RadialGrid<T>, k: usize, n: &[T]) -> Result<(), GridError> {
    if n.len() == grid.cells() * k {
        Ok(())
    } else {
        Err(GridError::SizeMismatch {
            expected: grid.cells() * k,
            got: n.len(),
        })
    }
}

/// `x log(x / c)` with the continuous extension at zero.
fn xlog<T: Real>(x: T, c: T) -> T {
    if x > T::lit(DENSITY_FLOOR) {
        x * (x / c).ln()
    } else {
        T::zero()
    }
}

/// `int F(n)` with the Gibbs entropy `F(n) = -k_B sum_j n_j (log(n_j/c_j) - 1)`.
pub fn gibbs_entropy<T: Real>(
    net: &ReactionNetwork<T>,
    grid: &RadialGrid<T>,
    n: &[T],
    boltzmann: T,
) -> Result<T, EntropyError> {
    let k = net.species_count();
    check_field(grid, k, n)?;
    let c = net.reference();
    let mut total = T::zero();
    for (cell, v) in n.chunks(k).zip(grid.volumes()) {
        let f: T = cell
            .iter()
            .zip(c)
            .map(|(&x, &cj)| xlog(x, cj) - x)
            .sum();
        total -= *v * f;
    }
    Ok(boltzmann * total)
}

/// `1/2 sum_faces A (phi_{i+1} - phi_i)^2 / h`, the discrete
/// `1/2 int |grad phi|^2` matching the Poisson stencil.
pub fn field_energy<T: Real>(grid: &RadialGrid<T>, phi: &[T]) -> Result<T, GridError> {
    grid.check_len(phi.len())?;
    let a = grid.face_areas();
    Ok((0..grid.cells().saturating_sub(1))
        .map(|f| {
            let d = phi[f + 1] - phi[f];
            a[f + 1] * d * d / grid.center_gap(f)
        })
        .sum::<T>()
        / T::lit(2.0))
}

/// Relative entropy
/// `int sum_i n_i log(n_i / n_inf_i) - (n_i - n_inf_i) + field_weight/2 |grad(phi - phi_inf)|^2`.
///
/// `field_weight` is `eps / (theta k_B)` in physical units, or the coupling
/// `lambda` for dimensionless fields.
pub fn relative_entropy<T: Real>(
    grid: &RadialGrid<T>,
    k: usize,
    n: &[T],
    phi: &[T],
    n_inf: &[T],
    phi_inf: &[T],
    field_weight: T,
) -> Result<T, EntropyError> {
    check_field(grid, k, n)?;
    check_field(grid, k, n_inf)?;
    grid.check_len(phi.len())?;
    grid.check_len(phi_inf.len())?;
    let mut total = T::zero();
    for (i, v) in grid.volumes().iter().enumerate() {
        let mut s = T::zero();
        for j in 0..k {
            let (x, e) = (n[i * k + j], n_inf[i * k + j]);
            if !(e > T::zero()) {
                return Err(EntropyError::Domain { cell: i, species: j });
            }
            s += xlog(x, e) - x + e;
        }
        total += *v * s;
    }
    if field_weight != T::zero() {
        let diff: Vec<T> = phi.iter().zip(phi_inf).map(|(a, b)| *a - *b).collect();
        total += field_weight * field_energy(grid, &diff)?;
    }
    Ok(total)
}

/// `int sum_j |n_j - m_j|`.
pub fn l1_distance<T: Real>(grid: &RadialGrid<T>, k: usize, n: &[T], m: &[T]) -> Result<T, GridError> {
    check_field(grid, k, n)?;
    check_field(grid, k, m)?;
    Ok(n.chunks(k)
        .zip(m.chunks(k))
        .zip(grid.volumes())
        .map(|((a, b), v)| *v * a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum::<T>())
        .sum())
}

/// Squared discrete `H^1` distance `int (phi - psi)^2 + sum_faces A d(phi - psi)^2 / h`.
pub fn h1_distance_sq<T: Real>(grid: &RadialGrid<T>, phi: &[T], psi: &[T]) -> Result<T, GridError> {
    grid.check_len(phi.len())?;
    grid.check_len(psi.len())?;
    let diff: Vec<T> = phi.iter().zip(psi).map(|(a, b)| *a - *b).collect();
    let sq: Vec<T> = diff.iter().map(|d| *d * *d).collect();
    Ok(grid.integrate(&sq)? + T::lit(2.0) * field_energy(grid, &diff)?)
}

fn three_point<T: Real>(t: [T; 3], g: [T; 3], at: usize) -> T {
    // derivative of the quadratic interpolant at node `at`
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    match at {
        0 => {
            -(T::lit(2.0) * h1 + h2) / (h1 * (h1 + h2)) * g[0] + (h1 + h2) / (h1 * h2) * g[1]
                - h1 / (h2 * (h1 + h2)) * g[2]
        }
        1 => -h2 / (h1 * (h1 + h2)) * g[0] + (h2 - h1) / (h1 * h2) * g[1] + h1 / (h2 * (h1 + h2)) * g[2],
        _ => {
            h2 / (h1 * (h1 + h2)) * g[0] - (h1 + h2) / (h1 * h2) * g[1]
                + (h1 + T::lit(2.0) * h2) / (h2 * (h1 + h2)) * g[2]
        }
    }
}

/// `-dG/dt` at the middle of three `(time, G)` records, second order on
/// non-uniform spacing.
pub fn dissipation<T: Real>(segment: &[(T, T)]) -> Result<T, EntropyError> {
    if segment.len() < 3 {
        return Err(EntropyError::TooFewRecords(segment.len()));
    }
    let mid = segment.len() / 2;
    let s = &segment[mid - 1..=mid + 1];
    if !(s[0].0 < s[1].0 && s[1].0 < s[2].0) {
        return Err(EntropyError::Unordered);
    }
    Ok(-three_point([s[0].0, s[1].0, s[2].0], [s[0].1, s[1].1, s[2].1], 1))
}

/// `-dG/dt` at every record: central in the interior, one-sided
/// second-order stencils at the ends. Fewer than three records give zeros
/// (one record) or a first-order difference (two).
pub fn dissipation_series<T: Real>(times: &[T], values: &[T]) -> Result<Vec<T>, EntropyError> {
    let n = times.len();
    if values.len() != n {
        return Err(GridError::SizeMismatch {
            expected: n,
            got: values.len(),
        }
        .into());
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EntropyError::Unordered);
    }
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![T::zero()]),
        2 => {
            let d = -(values[1] - values[0]) / (times[1] - times[0]);
            return Ok(vec![d, d]);
        }
        _ => {}
    }
    Ok((0..n)
        .map(|i| {
            let (base, at) = match i {
                0 => (0, 0),
                _ if i == n - 1 => (n - 3, 2),
                _ => (i - 1, 1),
            };
            -three_point(
                [times[base], times[base + 1], times[base + 2]],
                [values[base], values[base + 1], values[base + 2]],
                at,
            )
        })
        .collect())
}

/// `D* = sum_h (k_h / k0) l(n^a/c^a, n^b/c^b)` at one state.
pub fn simplified_dissipation<T: Real>(
    net: &ReactionNetwork<T>,
    n: &[T],
    k0: T,
) -> Result<T, KineticsError> {
    if n.len() != net.species_count() {
        return Err(KineticsError::SpeciesCount {
            expected: net.species_count(),
            got: n.len(),
        });
    }
    if !(k0 > T::zero()) {
        return Err(KineticsError::Domain("k0 must be positive".into()));
    }
    let mut total = T::zero();
    for (h, m) in net.mechanisms().iter().enumerate() {
        if let Some(j) = (0..n.len()).find(|&j| (m.reactants[j] > 0 || m.products[j] > 0) && !(n[j] > T::zero())) {
            return Err(KineticsError::Domain(format!(
                "simplified dissipation needs n[{j}] > 0 (mechanism {h})"
            )));
        }
        let (x, y) = net.monomial_ratios(h, n);
        total += m.rate / k0 * log_mean(x, y)?;
    }
    Ok(total)
}

/// `H = int sum_i pi_i n_i (log(n_i/c_i) - 1 + lambda_i) + exp(-lambda_i)`.
pub fn total_entropy<T: Real>(
    net: &ReactionNetwork<T>,
    grid: &RadialGrid<T>,
    n: &[T],
    pi: &[T],
    lambda: &[T],
) -> Result<T, EntropyError> {
    let k = net.species_count();
    check_field(grid, k, n)?;
    if pi.len() != k || lambda.len() != k {
        return Err(EntropyError::Weights(format!("need {k} weights each")));
    }
    if pi.iter().any(|p| !(*p > T::zero())) {
        return Err(EntropyError::Weights("pi must be positive".into()));
    }
    let c = net.reference();
    let mut total = T::zero();
    for (cell, v) in n.chunks(k).zip(grid.volumes()) {
        let mut s = T::zero();
        for j in 0..k {
            s += pi[j] * (xlog(cell[j], c[j]) + cell[j] * (lambda[j] - T::one())) + (-lambda[j]).exp();
        }
        total += *v * s;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::presets;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net() -> ReactionNetwork<f64> {
        presets::exciton_network([1.0, 2.0, 0.5, 3.0, 0.25, 1.5, 0.75], [0.3, 0.7, 1.1])
    }

    fn field(cells: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..cells * 3).map(|_| rng.gen_range(0.0..2.0)).collect()
    }

    #[test]
    fn gibbs_entropy_examples() {
        let net = net();
        let g = RadialGrid::uniform(1.0, 10).unwrap();
        let at_c: Vec<f64> = (0..10).flat_map(|_| [0.3, 0.7, 1.1]).collect();
        let v = gibbs_entropy(&net, &g, &at_c, 2.0).unwrap();
        assert!((v - 2.0 * g.total_volume() * 2.1).abs() < 1e-12);
        assert_eq!(gibbs_entropy(&net, &g, &vec![0.0; 30], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn gibbs_entropy_matches_refined_grid() {
        // piecewise-constant field: subdividing every shell must not change the integral
        let net = net();
        let coarse = RadialGrid::uniform(1.0, 12).unwrap();
        let n = field(12, 3);
        let fine_faces: Vec<f64> = coarse.faces().to_vec();
        let mut fine_n = Vec::new();
        let mut total = 0.0;
        for i in 0..12 {
            let (a, b) = (fine_faces[i], fine_faces[i + 1]);
            for s in 0..8 {
                let (r0, r1) = (a + (b - a) * s as f64 / 8.0, a + (b - a) * (s + 1) as f64 / 8.0);
                let vol = 4.0 / 3.0 * std::f64::consts::PI * (r1.powi(3) - r0.powi(3));
                let cell = &n[i * 3..i * 3 + 3];
                fine_n.extend_from_slice(cell);
                let f: f64 = cell
                    .iter()
                    .zip(net.reference())
                    .map(|(x, c)| if *x > 0.0 { x * (x / c).ln() - x } else { -x })
                    .sum();
                total -= vol * f;
            }
        }
        let v = gibbs_entropy(&net, &coarse, &n, 1.0).unwrap();
        assert!((v - total).abs() < 1e-8 * total.abs().max(1.0));
        assert_eq!(fine_n.len(), 12 * 8 * 3);
    }

    #[test]
    fn relative_entropy_examples() {
        let g = RadialGrid::uniform(0.7, 8).unwrap();
        let n_inf: Vec<f64> = (0..8).flat_map(|_| [0.5, 1.5]).collect();
        let zero = vec![0.0; 8];
        assert_eq!(relative_entropy(&g, 2, &n_inf, &zero, &n_inf, &zero, 1.0).unwrap(), 0.0);
        let doubled: Vec<f64> = n_inf.iter().map(|v| 2.0 * v).collect();
        let v = relative_entropy(&g, 2, &doubled, &zero, &n_inf, &zero, 1.0).unwrap();
        let expect = g.total_volume() * 2.0 * (2.0 * 2f64.ln() - 1.0);
        assert!((v - expect).abs() < 1e-13);
        let mut bad = n_inf.clone();
        bad[3] = 0.0;
        assert!(relative_entropy(&g, 2, &n_inf, &zero, &bad, &zero, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn relative_entropy_is_positive_off_equilibrium(seed in 0u64..500, w in 0.0f64..3.0) {
            let g = RadialGrid::uniform(1.0, 6).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n_inf: Vec<f64> = (0..18).map(|_| rng.gen_range(0.1..2.0)).collect();
            let phi_inf: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut n = n_inf.clone();
            let idx = rng.gen_range(0..18);
            n[idx] *= rng.gen_range(1.01..3.0);
            let v = relative_entropy(&g, 3, &n, &phi_inf, &n_inf, &phi_inf, w).unwrap();
            prop_assert!(v > 0.0);
        }
    }

    #[test]
    fn dissipation_of_exponential_is_second_order() {
        let g = |t: f64| (-2.0 * t).exp();
        let exact = 2.0 * g(1.0);
        let mut errs = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let seg = [(1.0 - h, g(1.0 - h)), (1.0, g(1.0)), (1.0 + h, g(1.0 + h))];
            errs.push((dissipation(&seg).unwrap() - exact).abs());
        }
        for w in errs.windows(2) {
            assert!(((w[0] / w[1]).log2() - 2.0).abs() < 0.1);
        }
        let flat = [(0.0f64, 1.0f64), (1.0, 1.0), (3.0, 1.0)];
        assert!(dissipation(&flat).unwrap().abs() < 1e-15);
        assert!(dissipation(&flat[..2]).is_err());
    }

    #[test]
    fn dissipation_series_on_quadratic_is_exact() {
        let times = [0.0, 0.3, 0.5, 1.2, 2.0];
        let values: Vec<f64> = times.iter().map(|t| 3.0 - t * t).collect();
        let d = dissipation_series(&times, &values).unwrap();
        for (t, v) in times.iter().zip(&d) {
            assert!((v - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn simplified_dissipation_examples() {
        let net = net();
        let total: f64 = net.mechanisms().iter().map(|m| m.rate).sum();
        let v = simplified_dissipation(&net, &[0.3, 0.7, 1.1], 2.0).unwrap();
        assert!((v - total / 2.0).abs() < 1e-14);
        let n = [0.9, 0.2, 1.7];
        let composed: f64 = (0..net.mechanism_count())
            .map(|h| {
                let m = &net.mechanisms()[h];
                let ca: f64 = crate::kinetics::monomial(net.reference(), &m.reactants);
                let cb: f64 = crate::kinetics::monomial(net.reference(), &m.products);
                let x = crate::kinetics::monomial(&n, &m.reactants) / ca;
                let y = crate::kinetics::monomial(&n, &m.products) / cb;
                m.rate / 3.0 * log_mean(x, y).unwrap()
            })
            .sum();
        assert!((simplified_dissipation(&net, &n, 3.0).unwrap() - composed).abs() < 1e-13);
        let single = presets::pair_annihilation(2.0f64, [1.0, 1.0]);
        let v = simplified_dissipation(&single, &[2.0, 3.0], 2.0).unwrap();
        assert!((v - log_mean(6.0f64, 1.0).unwrap()).abs() < 1e-14);
        assert!(simplified_dissipation(&single, &[0.0, 3.0], 2.0).is_err());
    }

    #[test]
    fn total_entropy_examples() {
        let net = net();
        let g = RadialGrid::uniform(1.0, 5).unwrap();
        let at_c: Vec<f64> = (0..5).flat_map(|_| [0.3, 0.7, 1.1]).collect();
        let v = total_entropy(&net, &g, &at_c, &[1.0; 3], &[0.0; 3]).unwrap();
        assert!((v - g.total_volume() * (3.0 - 2.1)).abs() < 1e-13);
        let lam = [0.5, -1.0, 2.0];
        let v0 = total_entropy(&net, &g, &[0.0; 15], &[2.0; 3], &lam).unwrap();
        let expect: f64 = lam.iter().map(|l: &f64| (-l).exp()).sum::<f64>() * g.total_volume();
        assert!((v0 - expect).abs() < 1e-12);
    }

    #[test]
    fn gibbs_and_total_entropy_differ_by_affine_terms() {
        // pi = 1, lambda = 0: H = -int F/k_B + k |Omega|
        let net = net();
        let g = RadialGrid::uniform(1.3, 9).unwrap();
        let n = field(9, 11);
        let h = total_entropy(&net, &g, &n, &[1.0; 3], &[0.0; 3]).unwrap();
        let f = gibbs_entropy(&net, &g, &n, 1.0).unwrap();
        assert!((h - (-f + 3.0 * g.total_volume())).abs() < 1e-12);
    }
}
