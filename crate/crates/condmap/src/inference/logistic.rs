//! Maximum-likelihood logistic regression via iteratively reweighted
//! least squares, with a small L2 penalty on the (standardized) feature
//! coefficients so separation cannot blow up the fit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const GRADIENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LogisticFit {
    /// Intercept first, then one coefficient per feature column.
    pub coefficients: Vec<f64>,
    /// Fitted probabilities, strictly inside (0, 1).
    pub probabilities: Vec<f64>,
    pub iterations: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Standardizes each column to zero mean and unit population SD; constant
/// columns become all-zero (inert).
pub fn standardize_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let n = rows.len() as f64;
    let k = rows[0].len();
    let mut means = vec![0.0f64; k];
    for row in rows {
        for (j, v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut sds = vec![0.0f64; k];
    for row in rows {
        for (j, v) in row.iter().enumerate() {
            sds[j] += (v - means[j]) * (v - means[j]);
        }
    }
    for s in sds.iter_mut() {
        *s = (*s / n).sqrt();
    }
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, v)| {
                    if sds[j] > 0.0 {
                        (v - means[j]) / sds[j]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Fits P(t = 1 | x) by IRLS. `features` holds one standardized row per
/// subject (no intercept column; it is added internally).
pub fn fit_logistic(
    features: &[Vec<f64>],
    targets: &[u8],
    l2: f64,
    max_iterations: usize,
) -> Result<LogisticFit> {
    let n = features.len();
    if n == 0 || n != targets.len() {
        return Err(Error::InvalidInput(
            "logistic fit needs one target per feature row".into(),
        ));
    }
    let k = features.first().map(|r| r.len()).unwrap_or(0);
    if features.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidInput("ragged feature matrix".into()));
    }
    let dim = k + 1;
    let x = DMatrix::from_fn(n, dim, |i, j| if j == 0 { 1.0 } else { features[i][j - 1] });
    let y = DVector::from_fn(n, |i, _| targets[i] as f64);
    let mut beta = DVector::zeros(dim);
    let mut grad_norm = f64::INFINITY;

    // penalized log-likelihood, for the step-halving guard
    let objective = |beta: &DVector<f64>| -> f64 {
        let z = &x * beta;
        let mut value = 0.0;
        for i in 0..n {
            // y*z - ln(1 + e^z), computed stably for large |z|
            value += y[i] * z[i] - if z[i] > 0.0 {
                z[i] + (-z[i]).exp().ln_1p()
            } else {
                z[i].exp().ln_1p()
            };
        }
        for j in 1..dim {
            value -= 0.5 * l2 * beta[j] * beta[j];
        }
        value
    };

    for iteration in 1..=max_iterations {
        let z = &x * &beta;
        let p = z.map(sigmoid);
        // gradient of the penalized log-likelihood (intercept unpenalized)
        let mut grad = x.transpose() * (&y - &p);
        for j in 1..dim {
            grad[j] -= l2 * beta[j];
        }
        grad_norm = grad.amax();
        if grad_norm < GRADIENT_TOL {
            // keep reported probabilities strictly inside (0, 1)
            let probabilities = p
                .iter()
                .map(|&v| v.clamp(1e-12, 1.0 - 1e-12))
                .collect();
            return Ok(LogisticFit {
                coefficients: beta.iter().copied().collect(),
                probabilities,
                iterations: iteration - 1,
            });
        }
        let w = DVector::from_fn(n, |i, _| (p[i] * (1.0 - p[i])).max(1e-10));
        let mut hessian = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in a..dim {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += x[(i, a)] * w[i] * x[(i, b)];
                }
                hessian[(a, b)] = acc;
                hessian[(b, a)] = acc;
            }
        }
        for j in 1..dim {
            hessian[(j, j)] += l2;
        }
        let step = hessian
            .clone()
            .cholesky()
            .map(|c| c.solve(&grad))
            .or_else(|| hessian.lu().solve(&grad))
            .ok_or_else(|| Error::Degenerate("singular IRLS system".into()))?;
        // halve the Newton step until the objective stops getting worse
        let current = objective(&beta);
        let mut scale = 1.0;
        let mut candidate = &beta + &step * scale;
        for _ in 0..30 {
            if objective(&candidate) >= current {
                break;
            }
            scale *= 0.5;
            candidate = &beta + &step * scale;
        }
        beta = candidate;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Degenerate("logistic coefficients diverged".into()));
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        residual: grad_norm,
    })
}
