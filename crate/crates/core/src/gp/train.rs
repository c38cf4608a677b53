//! Marginal-likelihood objectives (exact and lattice-interpolated) and the
//! Adam ascent that fits the hyperparameters.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{log_param_gradient, Matern52};
use super::kiss::{kiss_interp_weights, InducingLattice};
use crate::error::{Error, Result};

/// Diagonal jitter added to the exact Gram matrix.
pub const GRAM_JITTER: f64 = 1e-8;
/// Relative jitter on the inducing-point Gram matrix, which is far worse
/// conditioned than the data Gram matrix on a dense lattice.
pub const LATTICE_JITTER: f64 = 1e-6;
/// Consecutive non-finite evaluations tolerated before training fails.
pub const MAX_NONFINITE: usize = 5;
const LOG_BOUNDS: (f64, f64) = (-14.0, 10.0);
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Kernel and likelihood hyperparameters. `noise` is the observation noise
/// variance in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub length_scale: [f64; 2],
    pub output_scale: f64,
    pub noise: f64,
}

impl GpHyper {
    pub(crate) fn to_log(self) -> [f64; 4] {
        [
            self.length_scale[0].ln(),
            self.length_scale[1].ln(),
            self.output_scale.ln(),
            self.noise.ln(),
        ]
    }

    pub(crate) fn from_log(t: [f64; 4]) -> Self {
        Self {
            length_scale: [t[0].exp(), t[1].exp()],
            output_scale: t[2].exp(),
            noise: t[3].exp(),
        }
    }

    pub fn kernel(&self) -> Result<Matern52<f64>> {
        Matern52::new(self.length_scale, self.output_scale)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel()?;
        if !(self.noise > 0.0) {
            return Err(Error::InvalidParameter(format!("noise must be positive, got {}", self.noise)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMethod {
    Exact,
    Kiss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Largest training set solved exactly; above it the lattice approximation is used.
    pub exact_max_points: usize,
    /// Unpadded inducing lattice points per axis.
    pub lattice_points: [usize; 2],
    /// Initial length scales tried, one optimizer run each; the best MLL wins.
    pub initial_length_scales: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 0.05,
            exact_max_points: 4096,
            lattice_points: [24, 24],
            initial_length_scales: vec![0.05, 0.2, 0.8],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.initial_length_scales.is_empty() || self.initial_length_scales.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("initial_length_scales must be a non-empty list of positive values".into()));
        }
        if self.lattice_points.iter().any(|&n| n < 2) {
            return Err(Error::Config("lattice_points needs at least 2 per axis".into()));
        }
        Ok(())
    }
}

/// Log marginal likelihood and its gradient in log-hyperparameter space.
pub(crate) trait Objective: Sync {
    fn eval(&self, theta: [f64; 4]) -> Option<(f64, [f64; 4])>;
}

pub(crate) struct ExactObjective<'a> {
    pub points: &'a [[f64; 2]],
    pub y: &'a DVector<f64>,
}

impl ExactObjective<'_> {
    fn gram(&self, h: &GpHyper) -> Option<DMatrix<f64>> {
        let k = h.kernel().ok()?;
        let n = self.points.len();
        let mut m = DMatrix::from_fn(n, n, |i, j| k.eval(self.points[i], self.points[j]));
        for i in 0..n {
            m[(i, i)] += h.noise + GRAM_JITTER;
        }
        Some(m)
    }

    /// `(K + σ²I)⁻¹ y` for fixed hyperparameters.
    pub fn alpha(&self, h: &GpHyper) -> Result<DVector<f64>> {
        let chol = self
            .gram(h)
            .and_then(|g| g.cholesky())
            .ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))?;
        Ok(chol.solve(self.y))
    }
}

impl Objective for ExactObjective<'_> {
    fn eval(&self, theta: [f64; 4]) -> Option<(f64, [f64; 4])> {
        let h = GpHyper::from_log(theta);
        let k = h.kernel().ok()?;
        let n = self.points.len();
        let chol = self.gram(&h)?.cholesky()?;
        let alpha = chol.solve(self.y);
        let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().take(n).map(|v| v.ln()).sum::<f64>();
        let mll = -0.5 * self.y.dot(&alpha) - 0.5 * logdet - 0.5 * n as f64 * LN_2PI;
        let inv = chol.inverse();
        let mut grad = [0.0; 4];
        for i in 0..n {
            for j in 0..n {
                let a = alpha[i] * alpha[j] - inv[(i, j)];
                let d = log_param_gradient(&k, self.points[i], self.points[j]);
                grad[0] += a * d[0];
                grad[1] += a * d[1];
                grad[2] += a * d[2];
            }
        }
        let trace: f64 = (0..n).map(|i| alpha[i] * alpha[i] - inv[(i, i)]).sum();
        grad[3] = h.noise * trace;
        for g in &mut grad {
            *g *= 0.5;
        }
        (mll.is_finite() && grad.iter().all(|g| g.is_finite())).then_some((mll, grad))
    }
}

/// Sparse interpolation matrix `W` (one row per training point) and the
/// quantities of the training set that do not depend on hyperparameters.
pub(crate) struct KissObjective {
    pub lattice_points: Vec<[f64; 2]>,
    pub w: Vec<Vec<(usize, f64)>>,
    pub y: DVector<f64>,
    /// `WᵀW`
    pub g: DMatrix<f64>,
    /// `Wᵀy`
    pub b: DVector<f64>,
}

/// Pieces of one lattice-approximated likelihood evaluation.
pub(crate) struct KissSolve {
    pub mll: f64,
    /// `Wᵀα`
    pub a: DVector<f64>,
    pub alpha: DVector<f64>,
    pub k_uu: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub trace_inv: f64,
}

impl KissObjective {
    pub fn new(points: &[[f64; 2]], y: &[f64], lattice: &InducingLattice) -> Result<Self> {
        let m = lattice.len();
        let w: Vec<_> = points.iter().map(|&p| kiss_interp_weights(p, lattice)).collect::<Result<_>>()?;
        let mut g = DMatrix::zeros(m, m);
        let mut b = DVector::zeros(m);
        for (row, &yi) in w.iter().zip(y) {
            for &(i, wi) in row {
                b[i] += wi * yi;
                for &(j, wj) in row {
                    g[(i, j)] += wi * wj;
                }
            }
        }
        Ok(Self {
            lattice_points: lattice.points(),
            w,
            y: DVector::from_column_slice(y),
            g,
            b,
        })
    }

    pub fn k_uu(&self, k: &Matern52<f64>) -> DMatrix<f64> {
        let m = self.lattice_points.len();
        let mut kuu = DMatrix::from_fn(m, m, |i, j| k.eval(self.lattice_points[i], self.lattice_points[j]));
        for i in 0..m {
            kuu[(i, i)] += LATTICE_JITTER * k.output_scale;
        }
        kuu
    }

    pub fn solve(&self, h: &GpHyper) -> Option<KissSolve> {
        let k = h.kernel().ok()?;
        let n = self.y.len() as f64;
        let m = self.lattice_points.len();
        let s2 = h.noise;
        let k_uu = self.k_uu(&k);
        let l = k_uu.clone().cholesky()?.unpack();
        // C = I + σ⁻² Lᵀ G L
        let gl = &self.g * &l;
        let mut c = l.transpose() * &gl / s2;
        for i in 0..m {
            c[(i, i)] += 1.0;
        }
        let c_chol = c.cholesky()?;
        let logdet_c: f64 = 2.0 * c_chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let c_inv = c_chol.inverse();
        let p = &l * &c_inv * l.transpose();
        let pb = &p * &self.b;
        let ytay = (self.y.dot(&self.y) - self.b.dot(&pb) / s2) / s2;
        let logdet = n * s2.ln() + logdet_c;
        let mll = -0.5 * ytay - 0.5 * logdet - 0.5 * n * LN_2PI;
        let a = (&self.b - &self.g * &pb / s2) / s2;
        let mut alpha = self.y.clone();
        for (ai, row) in alpha.iter_mut().zip(&self.w) {
            let wpb: f64 = row.iter().map(|&(j, wj)| wj * pb[j]).sum();
            *ai = (*ai - wpb / s2) / s2;
        }
        let gpg = &self.g * &p * &self.g;
        let mmat = (&self.g - gpg / s2) / s2;
        let trace_inv = (n - m as f64 + c_inv.trace()) / s2;
        mll.is_finite().then_some(KissSolve {
            mll,
            a,
            alpha,
            k_uu,
            m: mmat,
            trace_inv,
        })
    }
}

impl Objective for KissObjective {
    fn eval(&self, theta: [f64; 4]) -> Option<(f64, [f64; 4])> {
        let h = GpHyper::from_log(theta);
        let k = h.kernel().ok()?;
        let s = self.solve(&h)?;
        let m = self.lattice_points.len();
        let mut grad = [0.0; 4];
        for i in 0..m {
            for j in 0..m {
                let coef = s.a[i] * s.a[j] - s.m[(i, j)];
                let d = log_param_gradient(&k, self.lattice_points[i], self.lattice_points[j]);
                grad[0] += coef * d[0];
                grad[1] += coef * d[1];
                grad[2] += coef * d[2];
            }
        }
        grad[3] = h.noise * (s.alpha.dot(&s.alpha) - s.trace_inv);
        for g in &mut grad {
            *g *= 0.5;
        }
        grad.iter().all(|g| g.is_finite()).then_some((s.mll, grad))
    }
}

/// Result of one optimizer run.
#[derive(Debug, Clone)]
pub struct Fit {
    pub hyper: GpHyper,
    pub mll: f64,
    /// MLL after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

/// Adam ascent on log-hyperparameters. A step is kept only if the MLL does
/// not drop; otherwise it is halved and retried a few times, then skipped.
pub(crate) fn adam_ascent(obj: &dyn Objective, init: [f64; 4], iterations: usize, lr: f64) -> Result<Fit> {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let mut theta = init;
    let (mut f, mut g) = obj
        .eval(theta)
        .ok_or_else(|| Error::Numerical("marginal likelihood is not finite at the initial hyperparameters".into()))?;
    let mut m1 = [0.0; 4];
    let mut m2 = [0.0; 4];
    let mut history = vec![f];
    let mut nonfinite = 0usize;
    for t in 1..=iterations {
        let mut step = [0.0; 4];
        for i in 0..4 {
            m1[i] = B1 * m1[i] + (1.0 - B1) * g[i];
            m2[i] = B2 * m2[i] + (1.0 - B2) * g[i] * g[i];
            let mh = m1[i] / (1.0 - B1.powi(t as i32));
            let vh = m2[i] / (1.0 - B2.powi(t as i32));
            step[i] = lr * mh / (vh.sqrt() + EPS);
        }
        let mut scale = 1.0;
        for _ in 0..MAX_NONFINITE {
            let cand = std::array::from_fn(|i| (theta[i] + scale * step[i]).clamp(LOG_BOUNDS.0, LOG_BOUNDS.1));
            match obj.eval(cand) {
                Some((fc, gc)) => {
                    nonfinite = 0;
                    if fc >= f {
                        theta = cand;
                        f = fc;
                        g = gc;
                        history.push(f);
                        break;
                    }
                }
                None => {
                    nonfinite += 1;
                    warn!("non-finite marginal likelihood at iteration {t}, halving the step");
                    if nonfinite >= MAX_NONFINITE {
                        return Err(Error::Numerical(format!(
                            "marginal likelihood stayed non-finite for {MAX_NONFINITE} consecutive attempts"
                        )));
                    }
                }
            }
            scale *= 0.5;
        }
    }
    debug!("adam finished at mll {f}");
    Ok(Fit {
        hyper: GpHyper::from_log(theta),
        mll: f,
        history,
    })
}

/// Runs the ascent from every configured start and keeps the best.
pub(crate) fn multi_start(obj: &dyn Objective, y: &[f64], config: &TrainConfig) -> Result<Fit> {
    config.validate()?;
    let power = y.iter().map(|v| v * v).sum::<f64>() / y.len().max(1) as f64;
    let scale = power.max(1e-2);
    let fits: Vec<Result<Fit>> = config
        .initial_length_scales
        .par_iter()
        .map(|&ls| {
            let init = GpHyper {
                length_scale: [ls, ls],
                output_scale: scale,
                noise: 0.1 * scale,
            };
            adam_ascent(obj, init.to_log(), config.iterations, config.learning_rate)
        })
        .collect();
    let mut best: Option<Fit> = None;
    let mut last_err = None;
    for f in fits {
        match f {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.mll > b.mll) {
                    best = Some(f);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one start was run"))
}
