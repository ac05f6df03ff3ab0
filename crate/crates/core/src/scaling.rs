//! Material constants, the dimensionless groups `d`, `m`, `k` and regime
//! classification.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::ReactionNetwork;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("invalid material parameter: {0}")]
    Material(String),
    #[error("characteristic length and time must be positive")]
    NonPositiveScale,
    #[error("eps_small must lie in (0, 0.1], got {0}")]
    EpsSmall(f64),
    #[error("ambiguous regime: both {0} and {1} apply")]
    AmbiguousRegime(ModelKind, ModelKind),
    #[error("unknown model kind `{0}`")]
    UnknownModel(String),
}

/// Physical constants of the crystal. The mobility matrix is diagonal and
/// the diffusion matrix follows from the Einstein relation
/// `D = (theta k_B / e) M`, so it is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams<T> {
    permittivity: T,
    temperature: T,
    mobility: Vec<T>,
    elementary_charge: T,
    boltzmann: T,
}

/// Mobilities below this fraction of the largest one count as immobile.
pub const IMMOBILE_FRACTION: f64 = 1e-12;

impl<T: Real> MaterialParams<T> {
    pub fn new(
        permittivity: T,
        temperature: T,
        mobility: Vec<T>,
        elementary_charge: T,
        boltzmann: T,
    ) -> Result<Self, ScalingError> {
        let positive = |v: T| v > T::zero() && v.is_finite();
        for (name, v) in [
            ("permittivity", permittivity),
            ("temperature", temperature),
            ("elementary charge", elementary_charge),
            ("Boltzmann constant", boltzmann),
        ] {
            if !positive(v) {
                return Err(ScalingError::Material(format!("{name} must be positive")));
            }
        }
        if mobility.is_empty() {
            return Err(ScalingError::Material("mobility list is empty".into()));
        }
        if let Some(j) = mobility.iter().position(|&m| !positive(m)) {
            return Err(ScalingError::Material(format!(
                "mobility of species {j} must be strictly positive (use a tiny value for immobile carriers)"
            )));
        }
        Ok(Self {
            permittivity,
            temperature,
            mobility,
            elementary_charge,
            boltzmann,
        })
    }

    /// All constants set to one, with the given mobilities.
    pub fn unit(mobility: Vec<T>) -> Result<Self, ScalingError> {
        Self::new(T::one(), T::one(), mobility, T::one(), T::one())
    }

    pub fn permittivity(&self) -> T {
        self.permittivity
    }

    pub fn temperature(&self) -> T {
        self.temperature
    }

    pub fn mobility(&self) -> &[T] {
        &self.mobility
    }

    pub fn elementary_charge(&self) -> T {
        self.elementary_charge
    }

    pub fn boltzmann(&self) -> T {
        self.boltzmann
    }

    pub fn species_count(&self) -> usize {
        self.mobility.len()
    }

    /// `theta k_B`.
    pub fn thermal_energy(&self) -> T {
        self.temperature * self.boltzmann
    }

    /// `theta k_B / e`.
    pub fn thermal_voltage(&self) -> T {
        self.thermal_energy() / self.elementary_charge
    }

    /// Diagonal of `D = (theta k_B / e) M`.
    pub fn diffusivity(&self) -> Vec<T> {
        let v = self.thermal_voltage();
        self.mobility.iter().map(|&m| v * m).collect()
    }

    pub fn max_mobility(&self) -> T {
        self.mobility.iter().fold(T::zero(), |a, &m| a.max(m))
    }

    pub fn min_mobility(&self) -> T {
        self.mobility.iter().fold(T::infinity(), |a, &m| a.min(m))
    }

    /// `delta = (k_B theta / e) mu` for the largest mobility.
    pub fn delta(&self) -> T {
        self.thermal_voltage() * self.max_mobility()
    }

    pub fn immobile_species(&self) -> Vec<usize> {
        let cut = self.max_mobility() * T::lit(IMMOBILE_FRACTION);
        (0..self.mobility.len())
            .filter(|&j| self.mobility[j] <= cut)
            .collect()
    }
}

/// Characteristic scales and the resulting dimensionless groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPack<T> {
    pub length: T,
    pub time: T,
    /// Largest mobility.
    pub mu: T,
    /// Largest mechanism rate.
    pub kappa: T,
    pub d: T,
    pub m: T,
    pub k: T,
    pub diffusion_length: T,
    /// Coupling `m / d = e^2 / (eps L theta k_B)`: converts the
    /// dimensionless potential into thermal units.
    pub coupling: T,
    /// `M / mu`, each entry in `(0, 1]`.
    pub relative_mobility: Vec<T>,
}

/// `d = T k_B theta mu / (e L^2)`, `m = e T mu / (eps L^3)` and
/// `k = kappa T L^3`, with `kappa` the largest mechanism rate.
///
/// Mechanism rates carry units of density per time (they multiply the
/// dimensionless ratios `n^a / c^a`), hence the `L^3` in `k`.
pub fn adimensionalize<T: Real>(
    params: &MaterialParams<T>,
    net: &ReactionNetwork<T>,
    length: T,
    time: T,
) -> Result<ScalingPack<T>, ScalingError> {
    if !(length > T::zero() && time > T::zero()) || !length.is_finite() || !time.is_finite() {
        return Err(ScalingError::NonPositiveScale);
    }
    let mu = params.max_mobility();
    let kappa = net.max_rate();
    let e = params.elementary_charge();
    let d = time * params.thermal_energy() * mu / (e * length * length);
    let m = e * time * mu / (params.permittivity() * length.powi(3));
    let k = kappa * time * length.powi(3);
    let delta = params.delta();
    Ok(ScalingPack {
        length,
        time,
        mu,
        kappa,
        d,
        m,
        k,
        diffusion_length: (delta * time).sqrt(),
        coupling: e * e / (params.permittivity() * length * params.thermal_energy()),
        relative_mobility: params.mobility().iter().map(|&v| v / mu).collect(),
    })
}

/// Time scale that makes `d = 1` for the given length.
pub fn diffusive_time<T: Real>(params: &MaterialParams<T>, length: T) -> T {
    length * length / params.delta()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    FullRdd,
    ReactionDiffusion,
    DiffusionDrift,
    ReactionDrift,
    Kinetic,
    Diffusive,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::FullRdd,
        ModelKind::ReactionDiffusion,
        ModelKind::DiffusionDrift,
        ModelKind::ReactionDrift,
        ModelKind::Kinetic,
        ModelKind::Diffusive,
    ];

    pub fn has_diffusion(self) -> bool {
        !matches!(self, ModelKind::ReactionDrift | ModelKind::Kinetic)
    }

    pub fn has_drift(self) -> bool {
        matches!(
            self,
            ModelKind::FullRdd | ModelKind::DiffusionDrift | ModelKind::ReactionDrift
        )
    }

    pub fn has_reaction(self) -> bool {
        !matches!(self, ModelKind::DiffusionDrift | ModelKind::Diffusive)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FullRdd => "FULL_RDD",
            ModelKind::ReactionDiffusion => "REACTION_DIFFUSION",
            ModelKind::DiffusionDrift => "DIFFUSION_DRIFT",
            ModelKind::ReactionDrift => "REACTION_DRIFT",
            ModelKind::Kinetic => "KINETIC",
            ModelKind::Diffusive => "DIFFUSIVE",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ScalingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        let alias = match norm.as_str() {
            "RDD" | "FULL" => "FULL_RDD",
            "RD" => "REACTION_DIFFUSION",
            "DD" | "PNP" => "DIFFUSION_DRIFT",
            other => other,
        };
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == alias)
            .ok_or_else(|| ScalingError::UnknownModel(s.to_string()))
    }
}

/// Picks the reduction whose smallness conditions hold:
///
/// | model              | small ratios |
/// |--------------------|--------------|
/// | REACTION_DIFFUSION | m/k, m/d     |
/// | DIFFUSION_DRIFT    | k/d, k/m     |
/// | REACTION_DRIFT     | d/k, d/m     |
/// | KINETIC            | d/k, m/k     |
/// | DIFFUSIVE          | m/d, k/d     |
///
/// `FULL_RDD` when none holds; an error when more than one does.
pub fn classify_regime<T: Real>(
    pack: &ScalingPack<T>,
    eps_small: f64,
) -> Result<ModelKind, ScalingError> {
    if !(eps_small > 0.0 && eps_small <= 0.1) {
        return Err(ScalingError::EpsSmall(eps_small));
    }
    let (d, m, k) = (
        pack.d.to_f64_lossy(),
        pack.m.to_f64_lossy(),
        pack.k.to_f64_lossy(),
    );
    let small = |num: f64, den: f64| num < eps_small * den;
    let candidates = [
        (ModelKind::ReactionDiffusion, small(m, k) && small(m, d)),
        (ModelKind::DiffusionDrift, small(k, d) && small(k, m)),
        (ModelKind::ReactionDrift, small(d, k) && small(d, m)),
        (ModelKind::Kinetic, small(d, k) && small(m, k)),
        (ModelKind::Diffusive, small(m, d) && small(k, d)),
    ];
    let mut hits = candidates.iter().filter(|c| c.1).map(|c| c.0);
    match (hits.next(), hits.next()) {
        (None, _) => Ok(ModelKind::FullRdd),
        (Some(a), None) => Ok(a),
        (Some(a), Some(b)) => Err(ScalingError::AmbiguousRegime(a, b)),
    }
}
