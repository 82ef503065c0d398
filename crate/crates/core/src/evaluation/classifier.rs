//! L2-regularized logistic regression and stratified hold-out splitting.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::embedder::sigmoid;
use crate::error::{Error, Result};

pub const DEFAULT_L2: f64 = 1e-4;
const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-7;
const ARMIJO_C: f64 = 1e-4;

/// Linear classifier over standardized features.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegression {
    weights: Vec<f64>,
    bias: f64,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

struct Design<'a> {
    x: Vec<f64>,
    y: &'a [bool],
    dim: usize,
    l2: f64,
}

impl Design<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    /// Regularized mean log-loss, optionally with its gradient in `grad`
    /// (weights first, bias last).
    fn loss(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (w, b) = theta.split_at(self.dim);
        let b = b[0];
        let n = self.n() as f64;
        let mut total = 0.0;
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for (row, &label) in self.x.chunks_exact(self.dim).zip(self.y) {
            let z: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            let y = if label { 1.0 } else { 0.0 };
            total += softplus(z) - y * z;
            if let Some(g) = g.as_deref_mut() {
                let r = (sigmoid(z) - y) / n;
                for (gk, xk) in g.iter_mut().zip(row) {
                    *gk += r * xk;
                }
                g[self.dim] += r;
            }
        }
        let penalty: f64 = w.iter().map(|v| v * v).sum::<f64>() * 0.5 * self.l2;
        if let Some(g) = g {
            for (gk, wk) in g.iter_mut().zip(w) {
                *gk += self.l2 * wk;
            }
        }
        total / n + penalty
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticRegression {
    /// Full-batch gradient descent with backtracking line search.
    pub fn fit(features: &[Vec<f64>], labels: &[bool], l2: f64) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                left: features.len(),
                right: labels.len(),
            });
        }
        let n_pos = labels.iter().filter(|&&y| y).count();
        if n_pos == 0 || n_pos == labels.len() {
            return Err(Error::SingleClass);
        }
        let dim = features[0].len();
        if let Some(bad) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch {
                left: bad.len(),
                right: dim,
            });
        }
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for f in features {
            for (m, x) in mean.iter_mut().zip(f) {
                *m += x / n;
            }
        }
        let mut scale = vec![0.0; dim];
        for f in features {
            for ((s, x), m) in scale.iter_mut().zip(f).zip(&mean) {
                *s += (x - m) * (x - m) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
        }
        let mut x = Vec::with_capacity(features.len() * dim);
        for f in features {
            x.extend(f.iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s));
        }
        let design = Design { x, y: labels, dim, l2 };

        let mut theta = vec![0.0; dim + 1];
        let mut grad = vec![0.0; dim + 1];
        let mut trial = vec![0.0; dim + 1];
        let mut loss = design.loss(&theta, Some(&mut grad));
        let mut step = 1.0;
        for _ in 0..MAX_ITER {
            let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm2.sqrt() < GRAD_TOL {
                break;
            }
            let mut accepted = false;
            while step > 1e-12 {
                for ((t, th), g) in trial.iter_mut().zip(&theta).zip(&grad) {
                    *t = th - step * g;
                }
                let next = design.loss(&trial, None);
                if next <= loss - ARMIJO_C * step * gnorm2 {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            std::mem::swap(&mut theta, &mut trial);
            let prev = loss;
            loss = design.loss(&theta, Some(&mut grad));
            if prev - loss <= 1e-15 * prev.abs().max(1.0) {
                break;
            }
            step *= 2.0;
        }
        let bias = theta[dim];
        theta.truncate(dim);
        Ok(LogisticRegression {
            weights: theta,
            bias,
            mean,
            scale,
        })
    }

    pub fn decision(&self, features: &[f64]) -> f64 {
        features
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .zip(&self.weights)
            .map(|(((x, m), s), w)| (x - m) / s * w)
            .sum::<f64>()
            + self.bias
    }

    /// `σ(w·x + b)`.
    pub fn predict_proba(&self, features: &[f64]) -> f64 {
        sigmoid(self.decision(features))
    }
}

/// Mean log-loss of probability scores, clamped away from 0 and 1.
pub fn log_loss(probs: &[f64], labels: &[bool]) -> f64 {
    let eps = 1e-15;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / probs.len() as f64
}

/// Splits indices into (fit, holdout), taking `fraction` of each class for
/// the hold-out while leaving at least one example per class on each side.
pub fn stratified_holdout<R: Rng + ?Sized>(labels: &[bool], fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("hold-out fraction must be in (0, 1), got {fraction}")));
    }
    let mut fit = Vec::new();
    let mut holdout = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::SingleClass);
        }
        idx.shuffle(rng);
        let take = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        holdout.extend_from_slice(&idx[..take]);
        fit.extend_from_slice(&idx[take..]);
    }
    fit.sort_unstable();
    holdout.sort_unstable();
    Ok((fit, holdout))
}
