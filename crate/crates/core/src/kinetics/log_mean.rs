use super::KineticsError;
use crate::scalar::Real;

/// Logarithmic mean `(x - y) / (log x - log y)`, `l(x, x) = x`.
///
/// With `m = (x + y)/2` and `t = (x - y)/(x + y)` the exact identity
/// `l = m t / atanh(t)` avoids the cancellation in `log x - log y`; for
/// `|t|` below `1e-3` the series `m / (1 + t^2/3 + t^4/5 + t^6/7)` is used.
/// Far from the diagonal (`|t| > 1/2`) the plain quotient is well
/// conditioned and is used instead of `atanh` near its pole.
pub fn log_mean<T: Real>(x: T, y: T) -> Result<T, KineticsError> {
    if !(x > T::zero() && y > T::zero()) || !x.is_finite() || !y.is_finite() {
        return Err(KineticsError::Domain(format!(
            "log_mean needs positive finite arguments, got ({x}, {y})"
        )));
    }
    if x == y {
        return Ok(x);
    }
    let (x, y) = if x > y { (x, y) } else { (y, x) };
    let m = (x + y) / T::lit(2.0);
    let t = (x - y) / (x + y);
    if t.abs() < T::lit(1e-3) {
        let t2 = t * t;
        let series = T::one() + t2 * (T::lit(1.0 / 3.0) + t2 * (T::lit(0.2) + t2 / T::lit(7.0)));
        Ok(m / series)
    } else if t < T::lit(0.5) {
        Ok(m * t / t.atanh())
    } else {
        Ok((x - y) / (x.ln() - y.ln()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(log_mean(1.0, 1.0).unwrap(), 1.0);
        let e = std::f64::consts::E;
        assert!((log_mean(e, 1.0).unwrap() - 1.718281828459045).abs() < 1e-14);
        // 50-digit reference: l(1, 1 + 1e-14) = 1.000000000000005
        let v = log_mean(1.0f64, 1.0 + 1e-14).unwrap();
        assert!((v - 1.000000000000005).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(log_mean(0.0, 1.0).is_err());
        assert!(log_mean(1.0, -2.0).is_err());
        assert!(log_mean(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn branches_agree_at_crossover() {
        for &t in &[0.999e-3, 1.001e-3] {
            let (x, y): (f64, f64) = (1.0 + t, 1.0 - t);
            let reference = (x - y) / (x.ln() - y.ln());
            let v = log_mean(x, y).unwrap();
            assert!(((v - reference) / reference).abs() < 1e-12);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let v: f32 = log_mean(2.0f32, 1.0f32).unwrap();
        assert!((v - std::f32::consts::LOG2_E).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn symmetric_and_between(x in 1e-8f64..1e8, y in 1e-8f64..1e8) {
            let a = log_mean(x, y).unwrap();
            let b = log_mean(y, x).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a);
            prop_assert!(a >= x.min(y) * (1.0 - 1e-14));
            prop_assert!(a <= x.max(y) * (1.0 + 1e-14));
        }

        #[test]
        fn near_diagonal_is_accurate(x in 1e-3f64..1e3, rel in -1e-6f64..1e-6) {
            let y = x * (1.0 + rel);
            let v = log_mean(x, y).unwrap();
            // geometric < log < arithmetic mean, both within rel^2 of each other
            let g = (x * y).sqrt();
            let a = (x + y) / 2.0;
            prop_assert!(v >= g * (1.0 - 1e-15) && v <= a * (1.0 + 1e-15));
        }
    }
}
