//! Radially symmetric finite-volume grid on the ball `|x| < R`.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("radius must be positive and finite")]
    InvalidRadius,
    #[error("grid needs at least one cell")]
    NoCells,
    #[error("refinement ratio must be positive and finite")]
    InvalidRatio,
    #[error("field has {got} entries, grid has {expected} cells")]
    SizeMismatch { expected: usize, got: usize },
}

/// Cells are spherical shells `[r_{i-1/2}, r_{i+1/2}]` with
/// `r_{1/2} = 0` and `r_{N+1/2} = R`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T> {
    radius: T,
    faces: Vec<T>,
    centers: Vec<T>,
    volumes: Vec<T>,
    areas: Vec<T>,
}

impl<T: Real> RadialGrid<T> {
    pub fn uniform(radius: T, cells: usize) -> Result<Self, GridError> {
        Self::geometric(radius, cells, T::one())
    }

    /// Shell widths grow outward by `ratio` (`ratio > 1` refines the centre).
    pub fn geometric(radius: T, cells: usize, ratio: T) -> Result<Self, GridError> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(GridError::InvalidRadius);
        }
        if cells == 0 {
            return Err(GridError::NoCells);
        }
        if !(ratio > T::zero()) || !ratio.is_finite() {
            return Err(GridError::InvalidRatio);
        }
        let mut widths = Vec::with_capacity(cells);
        let mut w = T::one();
        for _ in 0..cells {
            widths.push(w);
            w *= ratio;
        }
        let total: T = widths.iter().copied().sum();
        let mut faces = Vec::with_capacity(cells + 1);
        faces.push(T::zero());
        let mut acc = T::zero();
        for w in &widths[..cells - 1] {
            acc += *w;
            faces.push(radius * acc / total);
        }
        faces.push(radius);
        if !faces.windows(2).all(|f| f[0] < f[1]) {
            // widths underflowed relative to R
            return Err(GridError::InvalidRatio);
        }
        Ok(Self::from_faces(radius, faces))
    }

    fn from_faces(radius: T, faces: Vec<T>) -> Self {
        let four_pi = T::lit(4.0) * T::PI();
        let third = T::one() / T::lit(3.0);
        let centers = faces
            .windows(2)
            .map(|f| (f[0] + f[1]) / T::lit(2.0))
            .collect();
        let volumes = faces
            .windows(2)
            .map(|f| four_pi * third * (f[1].powi(3) - f[0].powi(3)))
            .collect();
        let areas = faces.iter().map(|r| four_pi * *r * *r).collect();
        Self {
            radius,
            faces,
            centers,
            volumes,
            areas,
        }
    }

    /// Same geometry with lengths multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self::from_faces(
            self.radius * factor,
            self.faces.iter().map(|f| *f * factor).collect(),
        )
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn faces(&self) -> &[T] {
        &self.faces
    }

    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    pub fn volumes(&self) -> &[T] {
        &self.volumes
    }

    /// Areas of all `N + 1` faces (the first one, at the origin, is zero).
    pub fn face_areas(&self) -> &[T] {
        &self.areas
    }

    /// Distance between the centres adjacent to interior face `i + 1/2`
    /// (`i` in `0..N-1`).
    pub fn center_gap(&self, i: usize) -> T {
        self.centers[i + 1] - self.centers[i]
    }

    pub fn total_volume(&self) -> T {
        T::lit(4.0) * T::PI() / T::lit(3.0) * self.radius.powi(3)
    }

    pub fn check_len(&self, len: usize) -> Result<(), GridError> {
        if len == self.cells() {
            Ok(())
        } else {
            Err(GridError::SizeMismatch {
                expected: self.cells(),
                got: len,
            })
        }
    }

    /// `sum_i field_i V_i`.
    pub fn integrate(&self, field: &[T]) -> Result<T, GridError> {
        self.check_len(field.len())?;
        Ok(field.iter().zip(&self.volumes).map(|(f, v)| *f * *v).sum())
    }

    /// Volume-weighted mean.
    pub fn mean(&self, field: &[T]) -> Result<T, GridError> {
        Ok(self.integrate(field)? / self.total_volume())
    }

    /// Poincare constant of the ball: the inverse of the first nonzero
    /// Neumann eigenvalue of `-Laplace`, `(R / mu_1)^2` with `mu_1` the first
    /// positive zero of `j_1'`.
    pub fn poincare_constant(&self) -> T {
        let mu = T::lit(first_neumann_root());
        (self.radius / mu).powi(2)
    }
}

fn spherical_j1_derivative(x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    j0 - 2.0 * j1 / x
}

/// First positive zero of `j_1'`, by bisection on `[1, 3]`.
pub fn first_neumann_root() -> f64 {
    let (mut lo, mut hi) = (1.0f64, 3.0f64);
    let flo = spherical_j1_derivative(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = spherical_j1_derivative(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}
