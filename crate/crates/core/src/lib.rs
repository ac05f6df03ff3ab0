//! Reaction-diffusion-drift kinetics of scintillating crystals.
//!
//! Carrier densities (electrons, holes, excitons, ...) in a ball-shaped
//! excitation track recombine through detailed-balance mass-action
//! mechanisms, diffuse, and drift in their own electrostatic field. The
//! crate builds the recombination networks, integrates the coupled radial
//! system and its regime reductions, and evaluates the entropy functionals
//! and decay-time estimates built on top of them.
//!
//! Numerical code is generic over [`Real`] (`f32`/`f64`); the polynomial
//! kinetics also run on exact rationals through [`Coefficient`].
// `!(x > 0)` rejects NaN as well; index loops mirror the stencils.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decay;
pub mod entropy;
pub mod grid;
pub mod kinetics;
pub mod linalg;
pub mod poisson;
pub mod rdd;
pub mod scalar;
pub mod scenario;
pub mod scaling;
pub mod trace;

pub use grid::{GridError, RadialGrid};
pub use kinetics::{KineticsError, Mechanism, ReactionNetwork, Recombination};
pub use poisson::{PoissonError, PotentialField};
pub use rdd::{RddProblem, SolverError, StepControl, SystemState};
pub use scalar::{Coefficient, Real};
pub use scaling::{MaterialParams, ModelKind, ScalingError, ScalingPack};

pub type ReactionNetwork64 = ReactionNetwork<f64>;
pub type RadialGrid64 = RadialGrid<f64>;
