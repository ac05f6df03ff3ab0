//! Small dense matrices and the block-tridiagonal solver used by the
//! radial transport scheme.

use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn from_row_major(dim: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] += v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

/// LU factorization with partial pivoting of a dense square block.
#[derive(Debug, Clone)]
pub(crate) struct Lu<T> {
    dim: usize,
    lu: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Returns `None` when a pivot vanishes.
    pub(crate) fn factor(dim: usize, mut a: Vec<T>) -> Option<Self> {
        let mut pivots = vec![0; dim];
        for col in 0..dim {
            let mut p = col;
            let mut best = a[col * dim + col].abs();
            for row in col + 1..dim {
                let v = a[row * dim + col].abs();
                if v > best {
                    best = v;
                    p = row;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return None;
            }
            pivots[col] = p;
            if p != col {
                for j in 0..dim {
                    a.swap(col * dim + j, p * dim + j);
                }
            }
            let inv = T::one() / a[col * dim + col];
            for row in col + 1..dim {
                let f = a[row * dim + col] * inv;
                a[row * dim + col] = f;
                if f != T::zero() {
                    for j in col + 1..dim {
                        let u = a[col * dim + j];
                        a[row * dim + j] -= f * u;
                    }
                }
            }
        }
        Some(Self { dim, lu: a, pivots })
    }

    pub(crate) fn solve_in_place(&self, b: &mut [T]) {
        let n = self.dim;
        for col in 0..n {
            let p = self.pivots[col];
            if p != col {
                b.swap(col, p);
            }
        }
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }
}

/// Solves a dense system, returning `None` if it is singular.
pub(crate) fn solve_dense<T: Real>(dim: usize, a: Vec<T>, mut b: Vec<T>) -> Option<Vec<T>> {
    let lu = Lu::factor(dim, a)?;
    lu.solve_in_place(&mut b);
    Some(b)
}

/// Block-tridiagonal matrix with dense `k x k` diagonal blocks and diagonal
/// off-diagonal blocks: row block `i` couples to `i-1` through `lower[i]`
/// and to `i+1` through `upper[i]`.
#[derive(Debug, Clone)]
pub(crate) struct BlockTridiagonal<T> {
    pub(crate) blocks: usize,
    pub(crate) k: usize,
    pub(crate) lower: Vec<T>,
    pub(crate) diag: Vec<T>,
    pub(crate) upper: Vec<T>,
}

pub(crate) struct FactoredBlockTridiagonal<T> {
    blocks: usize,
    k: usize,
    lower: Vec<T>,
    pivots: Vec<Lu<T>>,
    // D'^{-1}_i U_i, dense k x k per block
    coupling: Vec<T>,
}

impl<T: Real> BlockTridiagonal<T> {
    pub(crate) fn zeros(blocks: usize, k: usize) -> Self {
        Self {
            blocks,
            k,
            lower: vec![T::zero(); blocks * k],
            diag: vec![T::zero(); blocks * k * k],
            upper: vec![T::zero(); blocks * k],
        }
    }

    pub(crate) fn factor(&self) -> Option<FactoredBlockTridiagonal<T>> {
        let (nb, k) = (self.blocks, self.k);
        let mut pivots = Vec::with_capacity(nb);
        let mut coupling = vec![T::zero(); nb * k * k];
        for i in 0..nb {
            let mut d: Vec<T> = self.diag[i * k * k..(i + 1) * k * k].to_vec();
            if i > 0 {
                // D'_i = D_i - L_i X_{i-1}, L_i diagonal
                let prev = &coupling[(i - 1) * k * k..i * k * k];
                for r in 0..k {
                    let l = self.lower[i * k + r];
                    if l != T::zero() {
                        for c in 0..k {
                            d[r * k + c] -= l * prev[r * k + c];
                        }
                    }
                }
            }
            let lu = Lu::factor(k, d)?;
            if i + 1 < nb {
                // X_i = D'^{-1}_i U_i, column by column (U_i diagonal)
                let mut col = vec![T::zero(); k];
                for c in 0..k {
                    col.iter_mut().for_each(|v| *v = T::zero());
                    col[c] = self.upper[i * k + c];
                    lu.solve_in_place(&mut col);
                    for r in 0..k {
                        coupling[i * k * k + r * k + c] = col[r];
                    }
                }
            }
            pivots.push(lu);
        }
        Some(FactoredBlockTridiagonal {
            blocks: nb,
            k,
            lower: self.lower.clone(),
            pivots,
            coupling,
        })
    }
}

impl<T: Real> FactoredBlockTridiagonal<T> {
    pub(crate) fn solve_in_place(&self, b: &mut [T]) {
        let (nb, k) = (self.blocks, self.k);
        for i in 0..nb {
            if i > 0 {
                for r in 0..k {
                    let l = self.lower[i * k + r];
                    let prev = b[(i - 1) * k + r];
                    b[i * k + r] -= l * prev;
                }
            }
            self.pivots[i].solve_in_place(&mut b[i * k..(i + 1) * k]);
        }
        for i in (0..nb.saturating_sub(1)).rev() {
            for r in 0..k {
                let mut s = T::zero();
                for c in 0..k {
                    s += self.coupling[i * k * k + r * k + c] * b[(i + 1) * k + c];
                }
                b[i * k + r] -= s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solve() {
        let a = vec![0.0f64, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = solve_dense(3, a.clone(), vec![5.0, 3.0, 6.0]).unwrap();
        let m = DenseMatrix::from_row_major(3, a);
        let back = m.mul_vec(&x);
        for (b, e) in back.iter().zip([5.0, 3.0, 6.0]) {
            assert!((b - e).abs() < 1e-12);
        }
        assert!(solve_dense(2, vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn block_tridiagonal_matches_dense() {
        let (nb, k) = (5, 2);
        let mut bt = BlockTridiagonal::zeros(nb, k);
        let n = nb * k;
        let mut dense = vec![0.0; n * n];
        for i in 0..nb {
            for r in 0..k {
                for c in 0..k {
                    let v = if r == c { 4.0 + i as f64 } else { 0.3 * (r + 2 * c + i) as f64 };
                    bt.diag[i * k * k + r * k + c] = v;
                    dense[(i * k + r) * n + i * k + c] = v;
                }
                if i > 0 {
                    let v = -1.0 - 0.1 * r as f64;
                    bt.lower[i * k + r] = v;
                    dense[(i * k + r) * n + (i - 1) * k + r] = v;
                }
                if i + 1 < nb {
                    let v = -0.5 - 0.2 * i as f64;
                    bt.upper[i * k + r] = v;
                    dense[(i * k + r) * n + (i + 1) * k + r] = v;
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        bt.factor().unwrap().solve_in_place(&mut x);
        let reference = solve_dense(n, dense, rhs).unwrap();
        for (a, b) in x.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
