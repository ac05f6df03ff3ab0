use super::{log_mean, KineticsError, ReactionNetwork};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// Onsager matrix `H(n) = sum_h k_h l(n^a/c^a, n^b/c^b) (a-b)(a-b)^T`.
///
/// Only defined for densities that are positive wherever a mechanism has
/// nonzero stoichiometry; callers at the boundary of the state space clamp
/// to a small floor first.
pub fn onsager_matrix<T: Real>(
    net: &ReactionNetwork<T>,
    n: &[T],
) -> Result<DenseMatrix<T>, KineticsError> {
    let k = net.species_count();
    if n.len() != k {
        return Err(KineticsError::SpeciesCount {
            expected: k,
            got: n.len(),
        });
    }
    let mut h_mat = DenseMatrix::zeros(k);
    for (h, m) in net.mechanisms().iter().enumerate() {
        if let Some(j) = (0..k).find(|&j| {
            (m.reactants[j] > 0 || m.products[j] > 0) && !(n[j] > T::zero())
        }) {
            return Err(KineticsError::Domain(format!(
                "Onsager matrix needs n[{j}] > 0 (mechanism {h})"
            )));
        }
        let (x, y) = net.monomial_ratios(h, n);
        let weight = m.rate * log_mean(x, y)?;
        let change = m.change();
        for (i, &di) in change.iter().enumerate() {
            if di == 0 {
                continue;
            }
            for (j, &dj) in change.iter().enumerate() {
                if dj != 0 {
                    h_mat.add_to(i, j, weight * T::lit((di * dj) as f64));
                }
            }
        }
    }
    Ok(h_mat)
}

/// Scintillation potentials `s_j = e z_j phi + theta k_B log(n_j/c_j)`.
///
/// `field_energy` is `e phi` and `thermal_energy` is `theta k_B`, both in
/// the same energy unit.
pub fn scintillation_potential<T: Real>(
    net: &ReactionNetwork<T>,
    n: &[T],
    field_energy: T,
    thermal_energy: T,
) -> Vec<T> {
    n.iter()
        .zip(net.reference())
        .zip(net.charges())
        .map(|((&nj, &cj), &z)| T::lit(z as f64) * field_energy + thermal_energy * (nj / cj).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{presets, Mechanism};

    #[test]
    fn single_dyad_is_rank_one() {
        let net = ReactionNetwork::unnamed(
            vec![1, -1],
            vec![1.0, 2.0],
            vec![Mechanism::new(vec![1, 1], vec![0, 0], 1.5)],
        )
        .unwrap();
        let h = onsager_matrix(&net, &[0.7, 3.0]).unwrap();
        let v = h.get(0, 0);
        assert!(v > 0.0);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(h.get(i, j), v);
            }
        }
    }

    #[test]
    fn at_reference_state_weights_are_rates() {
        let rates = [1.0, 2.0, 0.5, 3.0, 0.25, 1.5, 0.75];
        let c = [0.3, 0.7, 1.1];
        let net = presets::exciton_network(rates, c);
        let h = onsager_matrix(&net, &c).unwrap();
        let mut expected = DenseMatrix::zeros(3);
        for m in net.mechanisms() {
            let d = m.change();
            for i in 0..3 {
                for j in 0..3 {
                    expected.add_to(i, j, m.rate * (d[i] * d[j]) as f64);
                }
            }
        }
        for (a, b) in h.as_slice().iter().zip(expected.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_with_nonzero_potential() {
        // z.(a-b) = 0 makes the field part of s drop out of H s
        let net = presets::exciton_network([1.0f64, 2.0, 0.5, 3.0, 0.25, 1.5, 0.75], [0.3, 0.7, 1.1]);
        let n = [0.9, 0.2, 1.7];
        let h = onsager_matrix(&net, &n).unwrap();
        let s = scintillation_potential(&net, &n, 0.37, 1.0);
        let hs = h.mul_vec(&s);
        let r = net.recombination(&n);
        for (a, b) in hs.iter().zip(&r) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn rejects_boundary_states() {
        let net = presets::exciton_network([1.0; 7], [1.0, 1.0, 1.0]);
        assert!(matches!(
            onsager_matrix(&net, &[0.0, 1.0, 1.0]),
            Err(KineticsError::Domain(_))
        ));
        assert!(onsager_matrix(&net, &[1.0, 1.0]).is_err());
    }
}
