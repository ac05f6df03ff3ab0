use super::{KineticsError, ReactionNetwork};
use crate::linalg::solve_dense;
use crate::scalar::Real;

/// Basis of the conservation laws: vectors `w` with `w.(a_h - b_h) = 0` for
/// every mechanism (the orthogonal complement of the stoichiometric space).
pub fn conservation_basis<T: Real>(net: &ReactionNetwork<T>) -> Vec<Vec<T>> {
    let k = net.species_count();
    let mut rows: Vec<Vec<T>> = net
        .mechanisms()
        .iter()
        .map(|m| m.change().iter().map(|&d| T::lit(d as f64)).collect())
        .collect();
    // reduced row echelon form
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..k {
        if r == rows.len() {
            break;
        }
        let (best, val) = (r..rows.len())
            .map(|i| (i, rows[i][col].abs()))
            .fold((r, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= T::lit(1e-9) {
            continue;
        }
        rows.swap(r, best);
        let p = rows[r][col];
        for v in rows[r].iter_mut() {
            *v /= p;
        }
        for i in 0..rows.len() {
            if i != r {
                let f = rows[i][col];
                if f != T::zero() {
                    for j in 0..k {
                        let sub = f * rows[r][j];
                        rows[i][j] -= sub;
                    }
                }
            }
        }
        pivot_cols.push(col);
        r += 1;
    }
    (0..k)
        .filter(|c| !pivot_cols.contains(c))
        .map(|free| {
            let mut w = vec![T::zero(); k];
            w[free] = T::one();
            for (row, &pc) in pivot_cols.iter().enumerate() {
                w[pc] = -rows[row][free];
            }
            w
        })
        .collect()
}

/// Detailed-balance equilibrium sharing the conserved quantities of
/// `state`: the unique `u = c exp(W^T alpha)` with `W u = W state`.
///
/// Solved by Newton's method on the convex dual
/// `sum_j u_j(alpha) - alpha . (W state)`.
pub fn conserved_equilibrium<T: Real>(
    net: &ReactionNetwork<T>,
    state: &[T],
) -> Result<Vec<T>, KineticsError> {
    let k = net.species_count();
    if state.len() != k {
        return Err(KineticsError::SpeciesCount {
            expected: k,
            got: state.len(),
        });
    }
    let basis = conservation_basis(net);
    let p = basis.len();
    let c = net.reference();
    if p == 0 {
        return Ok(c.to_vec());
    }
    let targets: Vec<T> = basis
        .iter()
        .map(|w| w.iter().zip(state).map(|(&a, &b)| a * b).sum())
        .collect();
    let scale: T = basis
        .iter()
        .map(|w| w.iter().zip(state).map(|(&a, &b)| (a * b).abs()).sum::<T>())
        .sum::<T>()
        + c.iter().copied().sum::<T>();

    let densities = |alpha: &[T]| -> Vec<T> {
        (0..k)
            .map(|j| {
                let e: T = (0..p).map(|i| basis[i][j] * alpha[i]).sum();
                c[j] * e.exp()
            })
            .collect()
    };
    let dual = |u: &[T], alpha: &[T]| -> T {
        u.iter().copied().sum::<T>() - alpha.iter().zip(&targets).map(|(&a, &b)| a * b).sum::<T>()
    };

    let mut alpha = vec![T::zero(); p];
    let mut u = densities(&alpha);
    for _ in 0..200 {
        let grad: Vec<T> = (0..p)
            .map(|i| basis[i].iter().zip(&u).map(|(&w, &x)| w * x).sum::<T>() - targets[i])
            .collect();
        let gnorm = grad.iter().fold(T::zero(), |a, g| a.max(g.abs()));
        if gnorm <= T::lit(1e-14) * scale {
            return Ok(u);
        }
        let mut hess = vec![T::zero(); p * p];
        for a in 0..p {
            for b in 0..p {
                hess[a * p + b] = (0..k).map(|j| basis[a][j] * basis[b][j] * u[j]).sum();
            }
        }
        let step = solve_dense(p, hess, grad.iter().map(|g| -*g).collect())
            .ok_or_else(|| KineticsError::Equilibrium("singular dual Hessian".into()))?;
        let current = dual(&u, &alpha);
        let slope: T = step.iter().zip(&grad).map(|(&s, &g)| s * g).sum();
        let mut t = T::one();
        loop {
            let trial: Vec<T> = alpha.iter().zip(&step).map(|(&a, &s)| a + t * s).collect();
            let ut = densities(&trial);
            if ut.iter().all(|v| v.is_finite())
                && dual(&ut, &trial) <= current + T::lit(1e-4) * t * slope
            {
                alpha = trial;
                u = ut;
                break;
            }
            t *= T::lit(0.5);
            if t < T::lit(1e-12) {
                // no further decrease available at this precision
                alpha = trial;
                u = ut;
                break;
            }
        }
    }
    Err(KineticsError::Equilibrium(
        "dual Newton iteration limit reached".into(),
    ))
}
