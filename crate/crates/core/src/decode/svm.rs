//! Linear soft-margin SVM trained by sequential minimal optimisation on the
//! dual, with the bias left unregularised:
//!
//! `min ½‖w‖² + C Σ max(0, 1 - y_i (w·x_i + b))`.
//!
//! Working pairs are chosen with second-order information (Fan, Chen & Lin
//! 2005). The Gram matrix is precomputed, which suits the small `n` of
//! augmented decoding sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub hyper_c: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            hyper_c: 1.0,
            tol: 1e-3,
            max_iter: 200_000,
        }
    }
}

impl SvmParams {
    pub fn with_c(hyper_c: f64) -> Self {
        SvmParams {
            hyper_c,
            ..SvmParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyper_c: f64,
    pub training_meta: TrainingMeta,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// `+1` or `-1`; an exact zero decision goes to `+1`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Fraction of rows of `features` (`n x d`) classified as `labels`.
    pub fn accuracy(&self, features: &[f64], labels: &[f64]) -> f64 {
        let d = self.weights.len();
        let hits = features
            .chunks_exact(d)
            .zip(labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / labels.len() as f64
    }

    pub fn primal_objective(&self, features: &[f64], labels: &[f64]) -> f64 {
        primal_objective(&self.weights, self.bias, self.hyper_c, features, labels)
    }
}

pub fn primal_objective(w: &[f64], b: f64, c: f64, features: &[f64], labels: &[f64]) -> f64 {
    let d = w.len();
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = features
        .chunks_exact(d)
        .zip(labels)
        .map(|(x, &y)| {
            let f = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b;
            (1.0 - y * f).max(0.0)
        })
        .sum();
    reg + c * hinge
}

/// Trains on `features` (`n x d`, row-major) with labels in `{-1, +1}`.
pub fn train_linear(features: &[f64], d: usize, labels: &[f64], params: &SvmParams) -> Result<LinearModel> {
    train_linear_from(features, d, labels, params, None).map(|(m, _)| m)
}

/// [`train_linear`] starting from the dual point `warm` (same labels and C),
/// also returning the final dual variables. Neighbouring time samples have
/// nearly identical solutions, so chaining them saves most SMO iterations.
pub fn train_linear_from(
    features: &[f64],
    d: usize,
    labels: &[f64],
    params: &SvmParams,
    warm: Option<&[f64]>,
) -> Result<(LinearModel, Vec<f64>)> {
    let n = labels.len();
    if d == 0 || features.len() != n * d {
        return Err(Error::DimensionMismatch(format!(
            "{} feature values for {n} rows of dimension {d}",
            features.len()
        )));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite feature value".into()));
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(Error::InvalidArgument("training set needs both classes".into()));
    }
    if !(params.hyper_c > 0.0) {
        return Err(Error::InvalidArgument("C must be > 0".into()));
    }
    let c = params.hyper_c;
    let y = labels;

    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        let xi = &features[i * d..(i + 1) * d];
        for j in i..n {
            let xj = &features[j * d..(j + 1) * d];
            let k: f64 = xi.iter().zip(xj).map(|(a, b)| a * b).sum();
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| gram[i * n + i]).collect();

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    if let Some(w) = warm {
        let feasible = w.len() == n
            && w.iter().all(|&a| (0.0..=c).contains(&a))
            && w.iter().zip(y).map(|(a, y)| a * y).sum::<f64>().abs() <= 1e-9 * c * n as f64;
        if feasible {
            alpha.copy_from_slice(w);
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let row = &gram[i * n..(i + 1) * n];
                    for t in 0..n {
                        grad[t] += y[t] * y[i] * row[t] * a;
                    }
                }
            }
        }
    }
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut sel_i = usize::MAX;
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                sel_i = t;
            }
        }
        // j: second-order choice in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut sel_j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if sel_i != usize::MAX {
            let i = sel_i;
            let row_i = &gram[i * n..(i + 1) * n];
            for t in 0..n {
                let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
                if !low {
                    continue;
                }
                let ygt = y[t] * grad[t];
                if ygt >= gmax2 {
                    gmax2 = ygt;
                }
                let b = gmax + ygt;
                if b > 0.0 {
                    let a = diag[i] + diag[t] - 2.0 * row_i[t];
                    let a = if a > 0.0 { a } else { TAU };
                    let v = -(b * b) / a;
                    if v <= obj_min {
                        obj_min = v;
                        sel_j = t;
                    }
                }
            }
        }
        if gmax + gmax2 < params.tol || sel_j == usize::MAX {
            converged = true;
            break;
        }
        let (i, j) = (sel_i, sel_j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qii = diag[i];
        let qjj = diag[j];
        let qij = y[i] * y[j] * gram[i * n + j];
        if y[i] != y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        // Q is symmetric, so walk rows i and j instead of columns
        let (di, dj) = (y[i] * (alpha[i] - old_i), y[j] * (alpha[j] - old_j));
        let (row_i, row_j) = (&gram[i * n..(i + 1) * n], &gram[j * n..(j + 1) * n]);
        for t in 0..n {
            grad[t] += y[t] * (row_i[t] * di + row_j[t] * dj);
        }
        iterations += 1;
    }

    // bias from free vectors, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut weights = vec![0.0; d];
    for t in 0..n {
        if alpha[t] != 0.0 {
            let s = alpha[t] * y[t];
            weights
                .iter_mut()
                .zip(&features[t * d..(t + 1) * d])
                .for_each(|(w, x)| *w += s * x);
        }
    }
    let bias = -rho;
    let objective = primal_objective(&weights, bias, c, features, labels);
    let model = LinearModel {
        weights,
        bias,
        hyper_c: c,
        training_meta: TrainingMeta {
            iterations,
            objective,
            converged,
        },
    };
    Ok((model, alpha))
}
