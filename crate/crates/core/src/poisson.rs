//! Neumann Poisson problem and the stationary Poisson-Boltzmann equation on
//! the radial grid.
//!
//! Both use the same two-point finite-volume stencil: the flux through face
//! `i + 1/2` is `-eps A (phi_{i+1} - phi_i) / h` with `h` the distance
//! between cell centres, and the faces at `r = 0` and `r = R` carry no
//! flux.

use thiserror::Error;

use crate::grid::{GridError, RadialGrid};
use crate::kinetics::ReactionNetwork;
use crate::linalg::BlockTridiagonal;
use crate::scalar::Real;
use crate::scaling::MaterialParams;

/// Relative tolerance on the total charge of a Neumann source.
pub const CHARGE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error("net charge {net:e} exceeds the Neumann compatibility tolerance ({tolerance:e})")]
    Compatibility { net: f64, tolerance: f64 },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("Newton iteration stopped after {iterations} steps with residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField<T> {
    pub values: Vec<T>,
    /// Set when the field has been shifted to zero (volume-weighted) mean.
    pub gauged: bool,
}

impl<T: Real> PotentialField<T> {
    pub fn zeros(cells: usize) -> Self {
        Self {
            values: vec![T::zero(); cells],
            gauged: true,
        }
    }
}

fn check_grid<T: Real>(grid: &RadialGrid<T>) -> Result<(), PoissonError> {
    let areas = grid.face_areas();
    for i in 0..grid.cells().saturating_sub(1) {
        let (a, h) = (areas[i + 1], grid.center_gap(i));
        if !(a > T::zero() && h > T::zero()) || !(a / h).is_finite() {
            return Err(PoissonError::SingularSystem(format!(
                "degenerate interior face {}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Shifts `phi` to zero volume-weighted mean.
pub fn apply_gauge<T: Real>(grid: &RadialGrid<T>, phi: &mut [T]) -> Result<(), GridError> {
    let mean = grid.mean(phi)?;
    for v in phi.iter_mut() {
        *v -= mean;
    }
    Ok(())
}

/// Solves `-eps Lap(phi) = rho` with zero-flux boundaries, where `rho` is
/// the cell-averaged charge density.
///
/// The source must carry no net charge up to [`CHARGE_TOLERANCE`]
/// relative to `sum |rho| V`; the remaining imbalance is projected out.
/// Returns the mean-zero solution.
pub fn solve_poisson_charge<T: Real>(
    grid: &RadialGrid<T>,
    permittivity: T,
    rho: &[T],
) -> Result<PotentialField<T>, PoissonError> {
    grid.check_len(rho.len())?;
    let gross: T = rho.iter().zip(grid.volumes()).map(|(q, v)| q.abs() * *v).sum();
    neumann_solve(grid, permittivity, rho, gross)
}

/// As [`solve_poisson_charge`], with the compatibility tolerance taken
/// relative to `charge_scale` (an absolute amount of charge).
pub(crate) fn neumann_solve<T: Real>(
    grid: &RadialGrid<T>,
    permittivity: T,
    rho: &[T],
    charge_scale: T,
) -> Result<PotentialField<T>, PoissonError> {
    grid.check_len(rho.len())?;
    if !(permittivity > T::zero()) {
        return Err(PoissonError::SingularSystem(
            "permittivity must be positive".into(),
        ));
    }
    check_grid(grid)?;
    let vols = grid.volumes();
    let net: T = rho.iter().zip(vols).map(|(q, v)| *q * *v).sum();
    let tolerance = T::lit(CHARGE_TOLERANCE) * charge_scale;
    if net.abs() > tolerance {
        return Err(PoissonError::Compatibility {
            net: net.to_f64_lossy(),
            tolerance: tolerance.to_f64_lossy(),
        });
    }
    let shift = net / grid.total_volume();
    let areas = grid.face_areas();
    let n = grid.cells();
    let mut phi = vec![T::zero(); n];
    // cumulative outward flux through face i + 1/2 equals the enclosed charge
    let mut enclosed = T::zero();
    for i in 0..n - 1 {
        enclosed += (rho[i] - shift) * vols[i];
        phi[i + 1] = phi[i] - grid.center_gap(i) * enclosed / (permittivity * areas[i + 1]);
    }
    apply_gauge(grid, &mut phi)?;
    Ok(PotentialField {
        values: phi,
        gauged: true,
    })
}

/// Potential generated by carriers `n` (cell-major, `k` species per cell):
/// `-eps Lap(phi) = e z.n`.
///
/// Compatibility is judged against the gross carrier charge
/// `e sum_j |z_j| int n_j`, so roundoff in a pointwise neutral state is not
/// mistaken for a net charge.
pub fn solve_poisson<T: Real>(
    grid: &RadialGrid<T>,
    params: &MaterialParams<T>,
    charges: &[i32],
    n: &[T],
) -> Result<PotentialField<T>, PoissonError> {
    let rho = charge_density(charges, n, params.elementary_charge());
    grid.check_len(rho.len())?;
    if rho.len() * charges.len() != n.len() {
        return Err(GridError::SizeMismatch {
            expected: grid.cells() * charges.len(),
            got: n.len(),
        }
        .into());
    }
    let scale = gross_charge(grid, charges, n, params.elementary_charge());
    neumann_solve(grid, params.permittivity(), &rho, scale)
}

/// Per-cell `unit * z.n` for cell-major densities.
pub fn charge_density<T: Real>(charges: &[i32], n: &[T], unit: T) -> Vec<T> {
    n.chunks(charges.len())
        .map(|cell| {
            unit * cell
                .iter()
                .zip(charges)
                .map(|(&v, &z)| T::lit(z as f64) * v)
                .sum::<T>()
        })
        .collect()
}

/// `unit * sum_i V_i sum_j |z_j| n_ij`.
pub fn gross_charge<T: Real>(grid: &RadialGrid<T>, charges: &[i32], n: &[T], unit: T) -> T {
    n.chunks(charges.len())
        .zip(grid.volumes())
        .map(|(cell, v)| {
            *v * cell
                .iter()
                .zip(charges)
                .map(|(&x, &z)| T::lit(z.unsigned_abs() as f64) * x.abs())
                .sum::<T>()
        })
        .sum::<T>()
        * unit
}

/// Discrete residual `max_i |div F - rho V|_i / max_i |rho V|_i` of a
/// potential, the face fluxes computed from the stencil.
pub fn poisson_residual<T: Real>(grid: &RadialGrid<T>, permittivity: T, phi: &[T], rho: &[T]) -> T {
    let n = grid.cells();
    let areas = grid.face_areas();
    let vols = grid.volumes();
    let flux = |i: usize| -> T {
        // outward flux through face i + 1/2
        if i + 1 >= n {
            T::zero()
        } else {
            -permittivity * areas[i + 1] * (phi[i + 1] - phi[i]) / grid.center_gap(i)
        }
    };
    let scale = rho
        .iter()
        .zip(vols)
        .fold(T::zero(), |a, (q, v)| a.max((*q * *v).abs()));
    let mut worst = T::zero();
    for i in 0..n {
        let inner = if i == 0 { T::zero() } else { flux(i - 1) };
        worst = worst.max((flux(i) - inner - rho[i] * vols[i]).abs());
    }
    if scale > T::zero() {
        worst / scale
    } else {
        worst
    }
}

/// Solution of the stationary Poisson-Boltzmann problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannState<T> {
    pub potential: PotentialField<T>,
    /// `n_j = c_j exp(-e z_j phi / theta k_B)`, cell-major.
    pub densities: Vec<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Solves `-eps Lap(phi) = e sum_j z_j c_j exp(-e z_j phi / theta k_B)`
/// with zero-flux boundaries by damped Newton from `phi = 0`.
///
/// The nonlinearity is monotone and fixes the additive constant, so the
/// returned potential is *not* shifted to zero mean (`gauged == false`);
/// without fixed charges it is the constant that neutralises
/// `sum_j z_j c_j exp(-z_j w)`.
pub fn solve_poisson_boltzmann<T: Real>(
    grid: &RadialGrid<T>,
    params: &MaterialParams<T>,
    net: &ReactionNetwork<T>,
) -> Result<BoltzmannState<T>, PoissonError> {
    check_grid(grid)?;
    let n = grid.cells();
    let k = net.species_count();
    let z: Vec<T> = net.charges().iter().map(|&q| T::lit(q as f64)).collect();
    let c = net.reference();
    let vt = params.thermal_voltage();
    let densities_at = |w: &[T]| -> Vec<T> {
        w.iter()
            .flat_map(|&wi| (0..k).map(move |j| (wi, j)))
            .map(|(wi, j)| c[j] * (-z[j] * wi).exp())
            .collect()
    };
    if z.iter().all(|q| *q == T::zero()) {
        return Ok(BoltzmannState {
            potential: PotentialField {
                values: vec![T::zero(); n],
                gauged: false,
            },
            densities: densities_at(&vec![T::zero(); n]),
            iterations: 0,
            residual: T::zero(),
        });
    }
    if z.iter().all(|q| *q >= T::zero()) || z.iter().all(|q| *q <= T::zero()) {
        return Err(PoissonError::SingularSystem(
            "all charges share one sign; no neutral Boltzmann state exists".into(),
        ));
    }
    // unknown w = e phi / theta k_B; beta = eps theta k_B / e^2
    let beta = params.permittivity() * vt / params.elementary_charge();
    let areas = grid.face_areas();
    let vols = grid.volumes();
    let coupling: Vec<T> = (0..n.saturating_sub(1))
        .map(|i| beta * areas[i + 1] / grid.center_gap(i))
        .collect();
    let source = |wi: T| -> (T, T) {
        let mut f = T::zero();
        let mut df = T::zero();
        for j in 0..k {
            let e = c[j] * (-z[j] * wi).exp();
            f += z[j] * e;
            df -= z[j] * z[j] * e;
        }
        (f, df)
    };
    let residual = |w: &[T]| -> Vec<T> {
        (0..n)
            .map(|i| {
                let mut g = -vols[i] * source(w[i]).0;
                if i > 0 {
                    g += coupling[i - 1] * (w[i] - w[i - 1]);
                }
                if i + 1 < n {
                    g += coupling[i] * (w[i] - w[i + 1]);
                }
                g
            })
            .collect()
    };
    let norm = |v: &[T]| v.iter().fold(T::zero(), |a, x| a.max(x.abs()));
    let scale = vols
        .iter()
        .fold(T::zero(), |a, v| a.max(*v))
        * (0..k).map(|j| z[j].abs() * c[j]).sum::<T>();
    let tol = T::lit(1e-10) * scale;

    let mut w = vec![T::zero(); n];
    let mut g = residual(&w);
    let mut gnorm = norm(&g);
    let max_iter = 100;
    let mut iter = 0;
    while gnorm > tol {
        if iter == max_iter {
            return Err(PoissonError::NonConvergence {
                iterations: iter,
                residual: (gnorm / scale).to_f64_lossy(),
            });
        }
        iter += 1;
        let mut jac = BlockTridiagonal::zeros(n, 1);
        for i in 0..n {
            let mut diag = -vols[i] * source(w[i]).1;
            if i > 0 {
                diag += coupling[i - 1];
                jac.lower[i] = -coupling[i - 1];
            }
            if i + 1 < n {
                diag += coupling[i];
                jac.upper[i] = -coupling[i];
            }
            jac.diag[i] = diag;
        }
        let fact = jac
            .factor()
            .ok_or_else(|| PoissonError::SingularSystem("Newton Jacobian".into()))?;
        let mut step: Vec<T> = g.iter().map(|v| -*v).collect();
        fact.solve_in_place(&mut step);
        let mut t = T::one();
        loop {
            let trial: Vec<T> = w.iter().zip(&step).map(|(a, s)| *a + t * *s).collect();
            let gt = residual(&trial);
            let nt = norm(&gt);
            if nt.is_finite() && (nt < gnorm || t < T::lit(1e-10)) {
                w = trial;
                g = gt;
                gnorm = nt;
                break;
            }
            t *= T::lit(0.5);
        }
    }
    let densities = densities_at(&w);
    Ok(BoltzmannState {
        potential: PotentialField {
            values: w.iter().map(|&wi| wi * vt).collect(),
            gauged: false,
        },
        densities,
        iterations: iter,
        residual: if scale > T::zero() { gnorm / scale } else { gnorm },
    })
}

/// `Phi = max_{i,j} |e z_j phi_i| / theta k_B`.
pub fn sup_potential<T: Real>(params: &MaterialParams<T>, phi: &PotentialField<T>, charges: &[i32]) -> T {
    let zmax = charges.iter().map(|z| z.unsigned_abs()).max().unwrap_or(0);
    let pmax = phi.values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    T::lit(zmax as f64) * pmax / params.thermal_voltage()
}
