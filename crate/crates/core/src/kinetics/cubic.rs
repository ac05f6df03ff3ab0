use super::{KineticsError, ReactionNetwork, Recombination};
use crate::scalar::Coefficient;

/// Phenomenological form of a recombination vector,
///
/// ```text
/// r_i(n) = r0_i + A_ij n_j + B_ijh n_j n_h + C_ijhm n_j n_h n_m
/// ```
///
/// Each monomial is stored once, under its sorted species indices
/// (`j <= h <= m`), so `quadratic(i, 0, 2)` is the full coefficient of
/// `n_0 n_2` in `r_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicTables<T> {
    k: usize,
    constant: Vec<T>,
    linear: Vec<T>,
    quadratic: Vec<T>,
    cubic: Vec<T>,
}

impl<T: Coefficient> CubicTables<T> {
    pub fn zeros(k: usize) -> Self {
        Self {
            k,
            constant: vec![T::zero(); k],
            linear: vec![T::zero(); k * k],
            quadratic: vec![T::zero(); k * k * k],
            cubic: vec![T::zero(); k * k * k * k],
        }
    }

    pub fn species_count(&self) -> usize {
        self.k
    }

    pub fn constant(&self, i: usize) -> T {
        self.constant[i].clone()
    }

    pub fn linear(&self, i: usize, j: usize) -> T {
        self.linear[i * self.k + j].clone()
    }

    pub fn quadratic(&self, i: usize, j: usize, h: usize) -> T {
        let (a, b) = if j <= h { (j, h) } else { (h, j) };
        self.quadratic[(i * self.k + a) * self.k + b].clone()
    }

    pub fn cubic(&self, i: usize, j: usize, h: usize, m: usize) -> T {
        let mut s = [j, h, m];
        s.sort_unstable();
        self.cubic[((i * self.k + s[0]) * self.k + s[1]) * self.k + s[2]].clone()
    }

    /// Coefficient of the monomial given as a species multiset.
    pub fn coefficient(&self, i: usize, species: &[usize]) -> T {
        match species {
            [] => self.constant(i),
            [j] => self.linear(i, *j),
            [j, h] => self.quadratic(i, *j, *h),
            [j, h, m] => self.cubic(i, *j, *h, *m),
            _ => T::zero(),
        }
    }

    /// Adds `v` to the coefficient of the monomial `species` in `r_i`.
    pub fn add(&mut self, i: usize, species: &[usize], v: T) {
        let k = self.k;
        let mut s = species.to_vec();
        s.sort_unstable();
        let slot = match s.as_slice() {
            [] => &mut self.constant[i],
            [j] => &mut self.linear[i * k + j],
            [j, h] => &mut self.quadratic[(i * k + j) * k + h],
            [j, h, m] => &mut self.cubic[((i * k + j) * k + h) * k + m],
            _ => panic!("monomial degree above three"),
        };
        *slot = slot.clone() + v;
    }

    /// Number of nonzero entries per degree `[r0, A, B, C]`.
    pub fn nonzero_counts(&self) -> [usize; 4] {
        let nz = |v: &[T]| v.iter().filter(|x| **x != T::zero()).count();
        [
            nz(&self.constant),
            nz(&self.linear),
            nz(&self.quadratic),
            nz(&self.cubic),
        ]
    }

    pub fn evaluate(&self, n: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.k];
        self.recombination_into(n, &mut out);
        out
    }
}

impl<T: Coefficient> Recombination<T> for CubicTables<T> {
    fn species_count(&self) -> usize {
        self.k
    }

    fn recombination_into(&self, n: &[T], out: &mut [T]) {
        let k = self.k;
        for i in 0..k {
            let mut acc = self.constant[i].clone();
            for j in 0..k {
                let a = &self.linear[i * k + j];
                if *a != T::zero() {
                    acc = acc + a.clone() * n[j].clone();
                }
                for h in j..k {
                    let b = &self.quadratic[(i * k + j) * k + h];
                    if *b != T::zero() {
                        acc = acc + b.clone() * n[j].clone() * n[h].clone();
                    }
                    for m in h..k {
                        let c = &self.cubic[((i * k + j) * k + h) * k + m];
                        if *c != T::zero() {
                            acc = acc + c.clone() * n[j].clone() * n[h].clone() * n[m].clone();
                        }
                    }
                }
            }
            out[i] = acc;
        }
    }
}

fn multiset(stoichiometry: &[u32]) -> Vec<usize> {
    stoichiometry
        .iter()
        .enumerate()
        .flat_map(|(j, &p)| std::iter::repeat_n(j, p as usize))
        .collect()
}

/// Expands the mass-action recombination vector of `net` into the cubic
/// phenomenological tables.
pub fn cubic_coefficients<T: Coefficient>(
    net: &ReactionNetwork<T>,
) -> Result<CubicTables<T>, KineticsError> {
    let k = net.species_count();
    let mut tables = CubicTables::zeros(k);
    for (h, m) in net.mechanisms().iter().enumerate() {
        for degree in [m.reactant_order(), m.product_order()] {
            if degree > 3 {
                return Err(KineticsError::UnsupportedDegree {
                    mechanism: h,
                    degree,
                });
            }
        }
        let ca = super::monomial(net.reference(), &m.reactants);
        let cb = super::monomial(net.reference(), &m.products);
        let forward = m.rate.clone() / ca;
        let backward = m.rate.clone() / cb;
        let fwd = multiset(&m.reactants);
        let bwd = multiset(&m.products);
        for (i, d) in m.change().into_iter().enumerate() {
            if d == 0 {
                continue;
            }
            let d = T::from_int(d);
            tables.add(i, &fwd, forward.clone() * d.clone());
            tables.add(i, &bwd, -(backward.clone() * d));
        }
    }
    Ok(tables)
}
