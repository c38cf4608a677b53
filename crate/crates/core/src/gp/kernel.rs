//! Matern-5/2 covariance with per-dimension length scales.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const SQRT5: f64 = 2.236_067_977_499_79;

/// `k(a, b) = s (1 + √5 r + 5r²/3) exp(−√5 r)`, `r` the length-scaled distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matern52<T> {
    pub length_scale: [T; 2],
    pub output_scale: T,
}

impl<T: Scalar> Matern52<T> {
    pub fn new(length_scale: [T; 2], output_scale: T) -> Result<Self> {
        if !(length_scale[0] > T::zero() && length_scale[1] > T::zero() && output_scale > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "kernel parameters must be positive, got length scales ({}, {}) and output scale {output_scale}",
                length_scale[0], length_scale[1]
            )));
        }
        Ok(Self {
            length_scale,
            output_scale,
        })
    }

    /// Scaled distance between two points.
    pub fn r(&self, a: [T; 2], b: [T; 2]) -> T {
        let dx = (a[0] - b[0]) / self.length_scale[0];
        let dy = (a[1] - b[1]) / self.length_scale[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn eval(&self, a: [T; 2], b: [T; 2]) -> T {
        matern25_of_r(self.r(a, b), self.output_scale)
    }
}

/// Covariance as a function of scaled distance.
pub fn matern25_of_r<T: Scalar>(r: T, output_scale: T) -> T {
    let s5r = T::lit(SQRT5) * r;
    output_scale * (T::one() + s5r + T::lit(5.0 / 3.0) * r * r) * (-s5r).exp()
}

pub fn matern25<T: Scalar>(a: [T; 2], b: [T; 2], length_scale: [T; 2], output_scale: T) -> Result<T> {
    Ok(Matern52::new(length_scale, output_scale)?.eval(a, b))
}

/// Derivatives of `k(a, b)` with respect to `log ℓx`, `log ℓy` and `log s`.
pub(crate) fn log_param_gradient(k: &Matern52<f64>, a: [f64; 2], b: [f64; 2]) -> [f64; 3] {
    let r = k.r(a, b);
    let common = (5.0 / 3.0) * k.output_scale * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
    let qx = ((a[0] - b[0]) / k.length_scale[0]).powi(2);
    let qy = ((a[1] - b[1]) / k.length_scale[1]).powi(2);
    [common * qx, common * qy, matern25_of_r(r, k.output_scale)]
}

/// Largest slope `|dk/dr|` of the unit-scale kernel, found by a fine scan
/// over `r ∈ [0, 2]` (the maximum sits near `r ≈ 0.72`).
pub fn max_slope_unit() -> f64 {
    // dk/dr = -(5/3) r (1 + √5 r) e^{-√5 r}
    let slope = |r: f64| (5.0 / 3.0) * r * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
    (0..=20_000).map(|i| slope(i as f64 * 1e-4)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_gives_output_scale() {
        let k = Matern52::new([0.3, 0.7], 2.5).unwrap();
        assert_eq!(k.eval([0.1, 0.2], [0.1, 0.2]), 2.5);
    }

    #[test]
    fn symmetric_and_decaying() {
        let k = Matern52::new([0.3, 0.7], 1.0).unwrap();
        let (a, b) = ([0.1, 0.9], [0.45, 0.2]);
        assert_eq!(k.eval(a, b), k.eval(b, a));
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let v = matern25_of_r(i as f64 * 0.05, 1.0);
            assert!(v <= prev);
            prev = v;
        }
        assert!(matern25_of_r(60.0, 1.0) < 1e-50);
    }

    #[test]
    fn rejects_non_positive_parameters() {
        assert!(Matern52::new([0.0, 1.0], 1.0).is_err());
        assert!(Matern52::new([1.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let k = Matern52::new([0.3, 0.5], 1.7).unwrap();
        let (a, b) = ([0.1, 0.4], [0.35, 0.15]);
        let g = log_param_gradient(&k, a, b);
        let h = 1e-6;
        let bump = |i: usize, d: f64| {
            let mut ls = k.length_scale;
            let mut s = k.output_scale;
            if i < 2 {
                ls[i] *= d.exp();
            } else {
                s *= d.exp();
            }
            Matern52::new(ls, s).unwrap().eval(a, b)
        };
        for (i, gi) in g.iter().enumerate() {
            let fd = (bump(i, h) - bump(i, -h)) / (2.0 * h);
            assert!((fd - gi).abs() < 1e-7, "param {i}: {fd} vs {gi}");
        }
    }
}
