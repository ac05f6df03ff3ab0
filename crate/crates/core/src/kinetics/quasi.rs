use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Recombination;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation<T> {
    pub species: usize,
    pub state: Vec<T>,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiNegativityReport<T> {
    pub holds: bool,
    pub samples_checked: usize,
    pub violation: Option<Violation<T>>,
}

/// Samples states with `n_i = 0` for each species in turn and checks
/// `r_i <= 0` there. Other densities are drawn log-uniformly over six
/// decades around the typical density; a fifth of them are set to zero to
/// probe the faces of the state space.
pub fn check_quasi_negativity<T: Real, R: Recombination<T>>(
    model: &R,
    samples: usize,
    seed: u64,
) -> QuasiNegativityReport<T> {
    let k = model.species_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = vec![T::zero(); k];
    let mut checked = 0;
    for _ in 0..samples {
        for i in 0..k {
            let state: Vec<T> = (0..k)
                .map(|j| {
                    if j == i || rng.gen_bool(0.2) {
                        T::zero()
                    } else {
                        let exponent: f64 = rng.gen_range(-3.0..3.0);
                        model.typical_density(j) * T::lit(10f64.powf(exponent))
                    }
                })
                .collect();
            model.recombination_into(&state, &mut r);
            checked += 1;
            let scale = r.iter().fold(T::one(), |a, v| a.max(v.abs()));
            if r[i] > T::lit(1e-12) * scale {
                return QuasiNegativityReport {
                    holds: false,
                    samples_checked: checked,
                    violation: Some(Violation {
                        species: i,
                        value: r[i],
                        state,
                    }),
                };
            }
        }
    }
    QuasiNegativityReport {
        holds: true,
        samples_checked: checked,
        violation: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{presets, CubicTables, Mechanism, ReactionNetwork};

    #[test]
    fn exciton_network_passes() {
        let net = presets::exciton_network([1.0f64, 2.0, 0.5, 3.0, 0.25, 1.5, 0.75], [0.3, 0.7, 1.1]);
        let rep = check_quasi_negativity(&net, 500, 7);
        assert!(rep.holds);
        assert_eq!(rep.samples_checked, 1500);
    }

    #[test]
    fn pure_creation_passes() {
        let net = ReactionNetwork::unnamed(
            vec![0, 1],
            vec![1.0, 1.0],
            vec![Mechanism::new(vec![0, 0], vec![1, 0], 2.0)],
        )
        .unwrap();
        assert_eq!(net.recombination(&[0.0, 3.0])[0], -2.0);
        assert!(check_quasi_negativity(&net, 200, 1).holds);
    }

    #[test]
    fn constructed_violation_is_reported() {
        // r_0 = 1 + n_1: positive on the face n_0 = 0
        let mut t = CubicTables::zeros(2);
        t.add(0, &[], 1.0);
        t.add(0, &[1], 1.0);
        let rep = check_quasi_negativity(&t, 10, 3);
        assert!(!rep.holds);
        let v = rep.violation.unwrap();
        assert_eq!(v.species, 0);
        assert_eq!(v.state[0], 0.0);
        assert!(v.value >= 1.0);
    }
}
