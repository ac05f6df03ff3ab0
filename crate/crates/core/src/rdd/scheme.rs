use super::RddProblem;
use crate::linalg::BlockTridiagonal;
use crate::scalar::Real;

/// Bernoulli function `x / (e^x - 1)`.
pub(crate) fn bernoulli<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-6) {
        T::one() - x / T::lit(2.0) + x * x / T::lit(12.0)
    } else {
        x / x.exp_m1()
    }
}

/// Outward flux density through face `i + 1/2` is `alpha u_i - beta u_{i+1}`
/// with `alpha, beta >= 0`; entries are indexed `face * k + species`.
pub(crate) struct FaceCoefficients<T> {
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Real> RddProblem<T> {
    pub(crate) fn face_coefficients(&self, psi: &[T]) -> FaceCoefficients<T> {
        let n = self.cells();
        let k = self.species_count();
        let faces = n.saturating_sub(1);
        let mut alpha = vec![T::zero(); faces * k];
        let mut beta = vec![T::zero(); faces * k];
        let diffusion = self.model.has_diffusion();
        let drift = self.model.has_drift();
        if !diffusion && !drift {
            return FaceCoefficients { alpha, beta };
        }
        let z: Vec<T> = self
            .network
            .charges()
            .iter()
            .map(|&q| T::lit(q as f64))
            .collect();
        for f in 0..faces {
            let h = self.grid.center_gap(f);
            let dpsi = psi[f + 1] - psi[f];
            for j in 0..k {
                let mob = self.mobility[j];
                let (a, b) = if diffusion {
                    let eta = if drift {
                        self.m / self.d * z[j] * dpsi
                    } else {
                        T::zero()
                    };
                    let s = mob * self.d / h;
                    (s * bernoulli(eta), s * bernoulli(-eta))
                } else {
                    // pure drift: upwind on the velocity -m z dpsi / h
                    let v = -self.m * z[j] * dpsi / h;
                    (mob * v.max(T::zero()), -(mob * v.min(T::zero())))
                };
                alpha[f * k + j] = a;
                beta[f * k + j] = b;
            }
        }
        FaceCoefficients { alpha, beta }
    }

    /// `du/dt` for frozen potential `psi`.
    pub(crate) fn rhs(&self, u: &[T], psi: &[T], out: &mut [T]) {
        let n = self.cells();
        let k = self.species_count();
        let vols = self.grid.volumes();
        let areas = self.grid.face_areas();
        for v in out.iter_mut() {
            *v = T::zero();
        }
        if self.model.has_reaction() && self.network.mechanism_count() > 0 {
            let mut r = vec![T::zero(); k];
            for i in 0..n {
                self.network_recombination(&u[i * k..(i + 1) * k], &mut r);
                for j in 0..k {
                    out[i * k + j] = -r[j];
                }
            }
        }
        if self.model.has_diffusion() || self.model.has_drift() {
            let fc = self.face_coefficients(psi);
            for f in 0..n.saturating_sub(1) {
                let a = areas[f + 1];
                for j in 0..k {
                    let flux = a
                        * (fc.alpha[f * k + j] * u[f * k + j]
                            - fc.beta[f * k + j] * u[(f + 1) * k + j]);
                    out[f * k + j] -= flux / vols[f];
                    out[(f + 1) * k + j] += flux / vols[f + 1];
                }
            }
        }
    }

    fn network_recombination(&self, cell: &[T], out: &mut [T]) {
        use crate::kinetics::Recombination;
        self.network.recombination_into(cell, out);
    }

    /// `I - gamma J(u)` with the potential frozen.
    pub(crate) fn shifted_jacobian(&self, u: &[T], psi: &[T], gamma: T) -> BlockTridiagonal<T> {
        let n = self.cells();
        let k = self.species_count();
        let vols = self.grid.volumes();
        let areas = self.grid.face_areas();
        let mut w = BlockTridiagonal::zeros(n, k);
        let kk = k * k;
        if self.model.has_reaction() && self.network.mechanism_count() > 0 {
            let mut jac = vec![T::zero(); kk];
            for i in 0..n {
                self.network
                    .recombination_jacobian(&u[i * k..(i + 1) * k], &mut jac);
                // d(-r)/du
                for (dst, src) in w.diag[i * kk..(i + 1) * kk].iter_mut().zip(&jac) {
                    *dst = gamma * *src;
                }
            }
        }
        for i in 0..n {
            for j in 0..k {
                w.diag[i * kk + j * k + j] += T::one();
            }
        }
        if self.model.has_diffusion() || self.model.has_drift() {
            let fc = self.face_coefficients(psi);
            for f in 0..n.saturating_sub(1) {
                let a = areas[f + 1];
                for j in 0..k {
                    let al = a * fc.alpha[f * k + j];
                    let be = a * fc.beta[f * k + j];
                    // cell f loses al u_f and gains be u_{f+1}; cell f+1 the reverse
                    w.diag[f * kk + j * k + j] += gamma * al / vols[f];
                    w.upper[f * k + j] -= gamma * be / vols[f];
                    w.diag[(f + 1) * kk + j * k + j] += gamma * be / vols[f + 1];
                    w.lower[(f + 1) * k + j] -= gamma * al / vols[f + 1];
                }
            }
        }
        w
    }
}
