//! Detailed-balance recombination networks.
//!
//! A network is a list of reversible mechanisms `a <=> b` with rate `k`,
//! a charge vector `z` and the detailed-balance reference densities `c`.
//! The recombination vector is
//!
//! ```text
//! r(n) = sum_h k_h (n^a_h / c^a_h - n^b_h / c^b_h) (a_h - b_h)
//! ```
//!
//! and the carrier densities evolve as `dn/dt = -r(n)` (plus transport).

mod cubic;
mod equilibrium;
mod log_mean;
mod onsager;
pub mod presets;
mod quasi;

pub use cubic::{cubic_coefficients, CubicTables};
pub use equilibrium::{conservation_basis, conserved_equilibrium};
pub use log_mean::log_mean;
pub use onsager::{onsager_matrix, scintillation_potential};
pub use quasi::{check_quasi_negativity, QuasiNegativityReport, Violation};

use thiserror::Error;

use crate::scalar::{Coefficient, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("expected {expected} species, got {got}")]
    SpeciesCount { expected: usize, got: usize },
    #[error("reference density of species {species} must be positive")]
    NonPositiveReference { species: usize },
    #[error("mechanism {mechanism}: rate must be positive")]
    NonPositiveRate { mechanism: usize },
    #[error("mechanism {mechanism}: reactants equal products")]
    TrivialMechanism { mechanism: usize },
    #[error("mechanism {mechanism} is not electrically neutral (z.(a-b) = {imbalance})")]
    ChargeImbalance { mechanism: usize, imbalance: i64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("mechanism {mechanism} has a degree {degree} monomial; at most cubic is supported")]
    UnsupportedDegree { mechanism: usize, degree: u32 },
    #[error("equilibrium solve did not converge: {0}")]
    Equilibrium(String),
}

/// Evaluates a recombination vector. Implemented by [`ReactionNetwork`] and
/// by [`CubicTables`]; user models (e.g. hand-built phenomenological terms)
/// can implement it to reuse the structural checks.
pub trait Recombination<T> {
    fn species_count(&self) -> usize;

    fn recombination_into(&self, n: &[T], out: &mut [T]);

    fn recombination(&self, n: &[T]) -> Vec<T>
    where
        T: Coefficient,
    {
        let mut out = vec![T::zero(); self.species_count()];
        self.recombination_into(n, &mut out);
        out
    }

    /// Typical density of species `j`, used to scale random samples.
    fn typical_density(&self, _species: usize) -> T
    where
        T: Coefficient,
    {
        T::one()
    }
}

/// `v^a = prod_j v_j^a_j`, with `0^0 = 1`.
pub fn monomial<T: Coefficient>(v: &[T], a: &[u32]) -> T {
    let mut acc = T::one();
    for (x, &p) in v.iter().zip(a) {
        for _ in 0..p {
            acc = acc * x.clone();
        }
    }
    acc
}

/// `d(v^a)/dv_j`.
fn monomial_derivative<T: Coefficient>(v: &[T], a: &[u32], j: usize) -> T {
    if a[j] == 0 {
        return T::zero();
    }
    let mut acc = T::from_int(a[j] as i64);
    for (i, (x, &p)) in v.iter().zip(a).enumerate() {
        let p = if i == j { p - 1 } else { p };
        for _ in 0..p {
            acc = acc * x.clone();
        }
    }
    acc
}

/// One reversible recombination mechanism `a <=> b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism<T> {
    pub reactants: Vec<u32>,
    pub products: Vec<u32>,
    pub rate: T,
}

impl<T> Mechanism<T> {
    pub fn new(reactants: Vec<u32>, products: Vec<u32>, rate: T) -> Self {
        Self {
            reactants,
            products,
            rate,
        }
    }

    /// `a - b` as signed integers.
    pub fn change(&self) -> Vec<i64> {
        self.reactants
            .iter()
            .zip(&self.products)
            .map(|(&a, &b)| a as i64 - b as i64)
            .collect()
    }

    pub fn reactant_order(&self) -> u32 {
        self.reactants.iter().sum()
    }

    pub fn product_order(&self) -> u32 {
        self.products.iter().sum()
    }
}

/// Charge vector, reference state and mechanism list.
///
/// Construction rejects mechanisms that are not electrically neutral; the
/// reference monomials `c^a` and `c^b` are cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork<T> {
    species: Vec<String>,
    charges: Vec<i32>,
    reference: Vec<T>,
    mechanisms: Vec<Mechanism<T>>,
    reactant_ref: Vec<T>,
    product_ref: Vec<T>,
}

impl<T: Coefficient> ReactionNetwork<T> {
    pub fn new(
        species: Vec<String>,
        charges: Vec<i32>,
        reference: Vec<T>,
        mechanisms: Vec<Mechanism<T>>,
    ) -> Result<Self, KineticsError> {
        let k = charges.len();
        if k == 0 {
            return Err(KineticsError::SpeciesCount {
                expected: 1,
                got: 0,
            });
        }
        for len in [species.len(), reference.len()] {
            if len != k {
                return Err(KineticsError::SpeciesCount {
                    expected: k,
                    got: len,
                });
            }
        }
        if let Some(j) = reference.iter().position(|c| *c <= T::zero()) {
            return Err(KineticsError::NonPositiveReference { species: j });
        }
        for (h, m) in mechanisms.iter().enumerate() {
            for len in [m.reactants.len(), m.products.len()] {
                if len != k {
                    return Err(KineticsError::SpeciesCount {
                        expected: k,
                        got: len,
                    });
                }
            }
            if m.rate <= T::zero() {
                return Err(KineticsError::NonPositiveRate { mechanism: h });
            }
            if m.reactants == m.products {
                return Err(KineticsError::TrivialMechanism { mechanism: h });
            }
            let imbalance: i64 = m
                .change()
                .iter()
                .zip(&charges)
                .map(|(d, &z)| d * z as i64)
                .sum();
            if imbalance != 0 {
                return Err(KineticsError::ChargeImbalance {
                    mechanism: h,
                    imbalance,
                });
            }
        }
        let reactant_ref = mechanisms
            .iter()
            .map(|m| monomial(&reference, &m.reactants))
            .collect();
        let product_ref = mechanisms
            .iter()
            .map(|m| monomial(&reference, &m.products))
            .collect();
        Ok(Self {
            species,
            charges,
            reference,
            mechanisms,
            reactant_ref,
            product_ref,
        })
    }

    /// Network with default species names `n1, n2, ...`.
    pub fn unnamed(
        charges: Vec<i32>,
        reference: Vec<T>,
        mechanisms: Vec<Mechanism<T>>,
    ) -> Result<Self, KineticsError> {
        let species = (1..=charges.len()).map(|j| format!("n{j}")).collect();
        Self::new(species, charges, reference, mechanisms)
    }

    pub fn species_count(&self) -> usize {
        self.charges.len()
    }

    pub fn mechanism_count(&self) -> usize {
        self.mechanisms.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn charges(&self) -> &[i32] {
        &self.charges
    }

    pub fn reference(&self) -> &[T] {
        &self.reference
    }

    pub fn mechanisms(&self) -> &[Mechanism<T>] {
        &self.mechanisms
    }

    /// Ratios `(n^a/c^a, n^b/c^b)` of mechanism `h`.
    pub fn monomial_ratios(&self, h: usize, n: &[T]) -> (T, T) {
        let m = &self.mechanisms[h];
        (
            monomial(n, &m.reactants) / self.reactant_ref[h].clone(),
            monomial(n, &m.products) / self.product_ref[h].clone(),
        )
    }

    /// Net rate `k (n^a/c^a - n^b/c^b)` of mechanism `h`; exactly zero at
    /// `n = c`.
    pub fn mechanism_flux(&self, h: usize, n: &[T]) -> T {
        let (fa, fb) = self.monomial_ratios(h, n);
        self.mechanisms[h].rate.clone() * (fa - fb)
    }

    pub fn recombination(&self, n: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.species_count()];
        self.recombination_into(n, &mut out);
        out
    }

    /// Row-major `k x k` Jacobian `dr_i/dn_j`.
    pub fn recombination_jacobian(&self, n: &[T], out: &mut [T]) {
        let k = self.species_count();
        debug_assert_eq!(out.len(), k * k);
        for v in out.iter_mut() {
            *v = T::zero();
        }
        for (h, m) in self.mechanisms.iter().enumerate() {
            let change = m.change();
            for j in 0..k {
                let dflux = m.rate.clone()
                    * (monomial_derivative(n, &m.reactants, j) / self.reactant_ref[h].clone()
                        - monomial_derivative(n, &m.products, j) / self.product_ref[h].clone());
                if dflux == T::zero() {
                    continue;
                }
                for (i, &d) in change.iter().enumerate() {
                    if d != 0 {
                        out[i * k + j] =
                            out[i * k + j].clone() + dflux.clone() * T::from_int(d);
                    }
                }
            }
        }
    }

    /// Same mechanisms with densities rescaled by `density_scale` and rates
    /// by `rate_scale`.
    pub fn rescaled(&self, density_scale: T, rate_scale: T) -> Self {
        let reference = self
            .reference
            .iter()
            .map(|c| c.clone() * density_scale.clone())
            .collect();
        let mechanisms = self
            .mechanisms
            .iter()
            .map(|m| Mechanism {
                rate: m.rate.clone() * rate_scale.clone(),
                ..m.clone()
            })
            .collect();
        Self::new(
            self.species.clone(),
            self.charges.clone(),
            reference,
            mechanisms,
        )
        .expect("rescaling preserves validity")
    }

    /// Same species and reference state, no mechanisms.
    pub fn without_mechanisms(&self) -> Self {
        Self {
            species: self.species.clone(),
            charges: self.charges.clone(),
            reference: self.reference.clone(),
            mechanisms: Vec::new(),
            reactant_ref: Vec::new(),
            product_ref: Vec::new(),
        }
    }

    /// Same network with every charge set to zero.
    pub fn uncharged(&self) -> Self {
        Self {
            charges: vec![0; self.species_count()],
            ..self.clone()
        }
    }

    /// Largest mechanism rate (zero for an empty network).
    pub fn max_rate(&self) -> T {
        self.mechanisms.iter().fold(T::zero(), |acc, m| {
            if m.rate > acc {
                m.rate.clone()
            } else {
                acc
            }
        })
    }
}

impl<T: Real> ReactionNetwork<T> {
    /// `k0 = |r(0)|_inf`, the constant creation rate. `None` when `r(0) = 0`.
    pub fn zero_state_rate(&self) -> Option<T> {
        let zero = vec![T::zero(); self.species_count()];
        let k0 = self
            .recombination(&zero)
            .into_iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()));
        (k0 > T::zero()).then_some(k0)
    }
}

impl<T: Coefficient> Recombination<T> for ReactionNetwork<T> {
    fn species_count(&self) -> usize {
        self.charges.len()
    }

    fn recombination_into(&self, n: &[T], out: &mut [T]) {
        for v in out.iter_mut() {
            *v = T::zero();
        }
        for (h, m) in self.mechanisms.iter().enumerate() {
            let flux = self.mechanism_flux(h, n);
            if flux == T::zero() {
                continue;
            }
            for (i, (&a, &b)) in m.reactants.iter().zip(&m.products).enumerate() {
                let d = a as i64 - b as i64;
                if d != 0 {
                    out[i] = out[i].clone() + flux.clone() * T::from_int(d);
                }
            }
        }
    }

    fn typical_density(&self, species: usize) -> T {
        self.reference[species].clone()
    }
}
