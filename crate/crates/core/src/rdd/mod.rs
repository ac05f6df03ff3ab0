//! Time integration of the dimensionless reaction-diffusion-drift system
//!
//! ```text
//! u_t = div(M* (d grad u + m u z grad psi)) - r(u),   -Lap psi = z.u
//! ```
//!
//! on the radial grid with zero total flux through `r = R`, and of its
//! five regime reductions (see [`ModelKind`]).
//!
//! Space: finite volumes with Scharfetter-Gummel fluxes (upwinding when
//! diffusion is switched off). Time: the L-stable Rosenbrock pair of
//! Shampine and Reichelt with the potential frozen in the Jacobian and
//! re-solved for every stage. Every stage preserves `z . int u`, so charge
//! is conserved to roundoff; negative densities below `-1e-13` reject the
//! step rather than being clipped.

mod integrator;
mod scheme;
mod weak;

pub use integrator::{RunOutput, StepControl, StepReport};
pub use weak::weak_residual;

use thiserror::Error;

use crate::grid::{GridError, RadialGrid};
use crate::kinetics::{conserved_equilibrium, KineticsError, ReactionNetwork};
use crate::poisson::{self, PoissonError, PotentialField};
use crate::scalar::Real;
use crate::scaling::{MaterialParams, ModelKind, ScalingPack};

/// Negative densities beyond this (relative to `max(1, |u|_inf)`) fail.
pub const NEGATIVE_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("step rejected at t = {time:e}; retry with dt <= {suggested:e}")]
    StepRejected { time: f64, suggested: f64 },
    #[error("density of species {species} in cell {cell} reached {value:e} at t = {time:e}")]
    PositivityFailure {
        time: f64,
        cell: usize,
        species: usize,
        value: f64,
    },
    #[error("step budget of {0} exhausted")]
    StepBudget(usize),
    #[error("potential at t = {time:e}: {source}")]
    Poisson { time: f64, source: PoissonError },
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Densities (cell-major, `k` per cell) and potential at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T> {
    pub time: T,
    pub densities: Vec<T>,
    pub potential: PotentialField<T>,
}

impl<T: Real> SystemState<T> {
    pub fn density(&self, k: usize, cell: usize, species: usize) -> T {
        self.densities[cell * k + species]
    }

    pub fn min_density(&self) -> T {
        self.densities
            .iter()
            .fold(T::infinity(), |a, v| a.min(*v))
    }
}

/// A dimensionless problem: grid and network already scaled, plus `d`, `m`,
/// relative mobilities and the model reduction to integrate.
#[derive(Debug, Clone)]
pub struct RddProblem<T> {
    grid: RadialGrid<T>,
    network: ReactionNetwork<T>,
    model: ModelKind,
    d: T,
    m: T,
    coupling: T,
    mobility: Vec<T>,
}

impl<T: Real> RddProblem<T> {
    /// `coupling` defaults to `m / d` (zero when `d = 0`).
    pub fn new(
        grid: RadialGrid<T>,
        network: ReactionNetwork<T>,
        model: ModelKind,
        d: T,
        m: T,
        mobility: Vec<T>,
    ) -> Result<Self, SolverError> {
        let k = network.species_count();
        if mobility.len() != k {
            return Err(SolverError::Invalid(format!(
                "{} mobilities for {k} species",
                mobility.len()
            )));
        }
        if mobility.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(SolverError::Invalid("mobilities must be positive".into()));
        }
        if !(d >= T::zero() && m >= T::zero()) || !d.is_finite() || !m.is_finite() {
            return Err(SolverError::Invalid("d and m must be non-negative".into()));
        }
        if model.has_diffusion() && d == T::zero() {
            return Err(SolverError::Invalid(format!("{model} needs d > 0")));
        }
        let coupling = if d > T::zero() { m / d } else { T::zero() };
        Ok(Self {
            grid,
            network,
            model,
            d,
            m,
            coupling,
            mobility,
        })
    }

    /// Scales a physical grid and network with `pack`.
    pub fn from_scaling(
        grid: &RadialGrid<T>,
        network: &ReactionNetwork<T>,
        model: ModelKind,
        pack: &ScalingPack<T>,
    ) -> Result<Self, SolverError> {
        let l = pack.length;
        let volume = l.powi(3);
        let mut p = Self::new(
            grid.scaled(T::one() / l),
            network.rescaled(volume, pack.time * volume),
            model,
            pack.d,
            pack.m,
            pack.relative_mobility.clone(),
        )?;
        p.coupling = pack.coupling;
        Ok(p)
    }

    /// Overrides the thermal coupling `lambda` used for `Phi` and the
    /// field energy.
    pub fn with_coupling(mut self, coupling: T) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_model(&self, model: ModelKind) -> Result<Self, SolverError> {
        let mut p = Self::new(
            self.grid.clone(),
            self.network.clone(),
            model,
            self.d,
            self.m,
            self.mobility.clone(),
        )?;
        p.coupling = self.coupling;
        Ok(p)
    }

    pub fn grid(&self) -> &RadialGrid<T> {
        &self.grid
    }

    pub fn network(&self) -> &ReactionNetwork<T> {
        &self.network
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn d(&self) -> T {
        self.d
    }

    pub fn m(&self) -> T {
        self.m
    }

    /// `lambda = e^2 / (eps L theta k_B)`: `lambda psi` is the potential in
    /// thermal units.
    pub fn coupling(&self) -> T {
        self.coupling
    }

    pub fn mobility(&self) -> &[T] {
        &self.mobility
    }

    pub fn species_count(&self) -> usize {
        self.network.species_count()
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    /// Weight of the field energy `1/2 sum A dpsi^2 / h` in the relative
    /// entropy: `lambda` for models that carry the potential, else zero.
    pub fn field_weight(&self) -> T {
        if self.model.has_drift() {
            self.coupling
        } else {
            T::zero()
        }
    }

    /// Potential of the given densities; zero for models without drift.
    pub fn potential(&self, densities: &[T]) -> Result<PotentialField<T>, PoissonError> {
        if !self.model.has_drift() {
            return Ok(PotentialField::zeros(self.cells()));
        }
        let z = self.network.charges();
        let rho = poisson::charge_density(z, densities, T::one());
        let scale = poisson::gross_charge(&self.grid, z, densities, T::one());
        poisson::neumann_solve(&self.grid, T::one(), &rho, scale)
    }

    /// State at time `time` with the potential solved from `densities`.
    pub fn state(&self, time: T, densities: Vec<T>) -> Result<SystemState<T>, SolverError> {
        if densities.len() != self.cells() * self.species_count() {
            return Err(GridError::SizeMismatch {
                expected: self.cells() * self.species_count(),
                got: densities.len(),
            }
            .into());
        }
        let potential = self.potential(&densities).map_err(|source| SolverError::Poisson {
            time: time.to_f64_lossy(),
            source,
        })?;
        Ok(SystemState {
            time,
            densities,
            potential,
        })
    }

    /// Spatially uniform state with the given per-species densities.
    pub fn uniform_state(&self, values: &[T]) -> Result<SystemState<T>, SolverError> {
        let densities = (0..self.cells()).flat_map(|_| values.iter().copied()).collect();
        self.state(T::zero(), densities)
    }

    /// `int u_j` per species.
    pub fn species_totals(&self, densities: &[T]) -> Vec<T> {
        let k = self.species_count();
        let mut out = vec![T::zero(); k];
        for (cell, v) in densities.chunks(k).zip(self.grid.volumes()) {
            for (o, x) in out.iter_mut().zip(cell) {
                *o += *x * *v;
            }
        }
        out
    }

    /// `z . int u`.
    pub fn total_charge(&self, densities: &[T]) -> T {
        self.species_totals(densities)
            .iter()
            .zip(self.network.charges())
            .map(|(t, &z)| *t * T::lit(z as f64))
            .sum()
    }

    /// Long-time limit reached from `initial`.
    ///
    /// Without reactions each species relaxes to its mean. With reactions
    /// and transport the limit is the uniform detailed-balance state that
    /// carries the conserved quantities of the mean initial density. The
    /// kinetic model has no transport, so every cell relaxes separately.
    pub fn equilibrium(&self, initial: &SystemState<T>) -> Result<SystemState<T>, SolverError> {
        let k = self.species_count();
        let n = self.cells();
        let densities = if self.model == ModelKind::Kinetic {
            let mut out = Vec::with_capacity(n * k);
            for cell in initial.densities.chunks(k) {
                out.extend(conserved_equilibrium(&self.network, cell)?);
            }
            out
        } else {
            let mean: Vec<T> = self
                .species_totals(&initial.densities)
                .iter()
                .map(|t| *t / self.grid.total_volume())
                .collect();
            let target = if self.model.has_reaction() {
                conserved_equilibrium(&self.network, &mean)?
            } else {
                mean
            };
            (0..n).flat_map(|_| target.iter().copied()).collect()
        };
        self.state(initial.time, densities)
    }

    /// `Phi = lambda max |z_j psi_i|` of a state.
    pub fn sup_potential(&self, state: &SystemState<T>) -> T {
        let zmax = self
            .network
            .charges()
            .iter()
            .map(|z| z.unsigned_abs())
            .max()
            .unwrap_or(0);
        let pmax = state
            .potential
            .values
            .iter()
            .fold(T::zero(), |a, v| a.max(v.abs()));
        self.coupling * T::lit(zmax as f64) * pmax
    }

    /// `Phi_inf = max |z_j w|` of the Boltzmann equilibrium
    /// `u_j = c_j exp(-z_j w)`, `w` in thermal units. Independent of the
    /// coupling and of the gauge of `psi`.
    pub fn boltzmann_sup_potential(&self) -> Result<T, PoissonError> {
        let params = MaterialParams::unit(self.mobility.clone())
            .map_err(|e| PoissonError::SingularSystem(e.to_string()))?;
        let eq = poisson::solve_poisson_boltzmann(&self.grid, &params, &self.network)?;
        Ok(poisson::sup_potential(&params, &eq.potential, self.network.charges()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::presets;
    use crate::scaling::{adimensionalize, MaterialParams};

    fn pair_problem(model: ModelKind) -> RddProblem<f64> {
        let grid = RadialGrid::uniform(0.5, 12).unwrap();
        let net = presets::pair_annihilation(1.0, [1.2, 0.8]);
        RddProblem::new(grid, net, model, 1.0, 1.0, vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn equilibrium_is_uniform_detailed_balance_state() {
        let p = pair_problem(ModelKind::FullRdd);
        let init = p.uniform_state(&[2.0, 2.0]).unwrap();
        let eq = p.equilibrium(&init).unwrap();
        let g = 0.96f64.sqrt();
        assert!(eq.densities.iter().all(|v| (v - g).abs() < 1e-13));
        assert!(eq.potential.values.iter().all(|v| v.abs() < 1e-13));
        let diff = p.with_model(ModelKind::Diffusive).unwrap();
        let eq = diff.equilibrium(&init).unwrap();
        assert!(eq.densities.iter().all(|v| (v - 2.0).abs() < 1e-13));
    }

    #[test]
    fn charged_state_is_rejected_when_drift_is_on() {
        let p = pair_problem(ModelKind::FullRdd);
        assert!(matches!(
            p.uniform_state(&[1.0, 2.0]),
            Err(SolverError::Poisson { .. })
        ));
        let rd = p.with_model(ModelKind::ReactionDiffusion).unwrap();
        assert!(rd.uniform_state(&[1.0, 2.0]).is_ok());
    }

    #[test]
    fn from_scaling_rescales_network_and_grid() {
        let params = MaterialParams::new(2.0f64, 3.0, vec![0.5, 0.25], 1.0, 1.0).unwrap();
        let grid = RadialGrid::uniform(4.0, 8).unwrap();
        let net = presets::pair_annihilation(3.0, [0.1, 0.2]);
        let pack = adimensionalize(&params, &net, 2.0, 0.5).unwrap();
        let p = RddProblem::from_scaling(&grid, &net, ModelKind::FullRdd, &pack).unwrap();
        assert_eq!(p.grid().radius(), 2.0);
        assert_eq!(p.network().reference(), &[0.8, 1.6]);
        assert_eq!(p.network().max_rate(), 3.0 * 0.5 * 8.0);
        assert_eq!(p.mobility(), &[1.0, 0.5]);
        assert!((p.coupling() - pack.m / pack.d).abs() < 1e-15);
    }

    #[test]
    fn invalid_problems() {
        let grid = RadialGrid::uniform(1.0, 4).unwrap();
        let net = presets::pair_annihilation(1.0, [1.0, 1.0]);
        assert!(RddProblem::new(grid.clone(), net.clone(), ModelKind::Diffusive, 0.0, 1.0, vec![1.0; 2]).is_err());
        assert!(RddProblem::new(grid.clone(), net.clone(), ModelKind::Kinetic, 0.0, 0.0, vec![1.0; 3]).is_err());
        assert!(RddProblem::new(grid, net, ModelKind::ReactionDrift, 0.0, 1.0, vec![1.0; 2]).is_ok());
    }
}
