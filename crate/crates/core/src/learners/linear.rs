//! Least squares, ridge and L2-penalised logistic regression on internally
//! standardised features. Coefficients are reported in original units.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::tree::check_dim;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Weighted column means and scales; constant columns get scale 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &Matrix, w: &[f64]) -> Self {
        let d = x.n_cols();
        let wsum: f64 = w.iter().sum();
        let mut mean = vec![0.0; d];
        for (i, row) in x.rows().enumerate() {
            for j in 0..d {
                mean[j] += w[i] * row[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= wsum);
        let mut var = vec![0.0; d];
        for (i, row) in x.rows().enumerate() {
            for j in 0..d {
                let c = row[j] - mean[j];
                var[j] += w[i] * c * c;
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let s = (v / wsum).sqrt();
                if s > 1e-12 * (1.0 + m.abs()) {
                    s
                } else {
                    0.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    /// Standardised design; constant columns become zeros.
    fn transform(&self, x: &Matrix) -> DMatrix<f64> {
        let d = x.n_cols();
        DMatrix::from_fn(x.n_rows(), d, |i, j| {
            if self.scale[j] > 0.0 {
                (x.get(i, j) - self.mean[j]) / self.scale[j]
            } else {
                0.0
            }
        })
    }

    /// Maps standardised-space coefficients back to raw units.
    fn unscale(&self, beta: &[f64], intercept_std: f64) -> (Vec<f64>, f64) {
        let mut coef = vec![0.0; beta.len()];
        let mut intercept = intercept_std;
        for j in 0..beta.len() {
            if self.scale[j] > 0.0 {
                coef[j] = beta[j] / self.scale[j];
                intercept -= coef[j] * self.mean[j];
            }
        }
        (coef, intercept)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    coefficients: Vec<f64>,
    intercept: f64,
}

impl LinearModel {
    /// Weighted least squares; `lambda > 0` adds a ridge penalty on the
    /// standardised slopes (the intercept is never penalised).
    pub(crate) fn fit(x: &Matrix, y: &[f64], w: &[f64], lambda: f64) -> Result<Self> {
        let st = Standardizer::fit(x, w);
        let z = st.transform(x);
        let wsum: f64 = w.iter().sum();
        let ybar = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum;
        let d = x.n_cols();
        let mut gram = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        for i in 0..x.n_rows() {
            let zi = z.row(i);
            let wi = w[i];
            let yi = y[i] - ybar;
            for a in 0..d {
                let za = zi[a] * wi;
                if za == 0.0 {
                    continue;
                }
                rhs[a] += za * yi;
                for b in a..d {
                    gram[(a, b)] += za * zi[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        let beta = if lambda > 0.0 {
            for a in 0..d {
                gram[(a, a)] += lambda;
            }
            gram.cholesky()
                .ok_or_else(|| Error::Numeric("ridge system not positive definite".into()))?
                .solve(&rhs)
        } else {
            solve_pseudo_inverse(gram, &rhs)
        };
        let (coefficients, intercept) = st.unscale(beta.as_slice(), ybar);
        Ok(Self {
            coefficients,
            intercept,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}

/// Minimum-norm solution of a symmetric PSD system via its eigendecomposition,
/// so collinear designs still get a deterministic answer.
fn solve_pseudo_inverse(gram: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let d = gram.nrows();
    if d == 0 {
        return DVector::zeros(0);
    }
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let tol = top * 1e-12 * d as f64;
    let proj = eig.eigenvectors.transpose() * rhs;
    let mut scaled = DVector::zeros(d);
    for k in 0..d {
        let l = eig.eigenvalues[k];
        if l > tol {
            scaled[k] = proj[k] / l;
        }
    }
    eig.eigenvectors * scaled
}

const LOGISTIC_MAX_ITER: usize = 500;
const LOGISTIC_GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    coefficients: Vec<f64>,
    intercept: f64,
    iterations: usize,
    converged: bool,
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    /// Damped Newton on the weighted, L2-penalised negative log-likelihood,
    /// stopping at gradient norm <= 1e-8 or 500 iterations.
    pub(crate) fn fit(x: &Matrix, labels: &[bool], w: &[f64], lambda: f64) -> Result<Self> {
        let st = Standardizer::fit(x, w);
        let z = st.transform(x);
        let n = x.n_rows();
        let d = x.n_cols();
        let p = d + 1;
        // design with a leading intercept column
        let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { z[(i, j - 1)] });
        let yv: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

        let objective = |beta: &DVector<f64>| -> f64 {
            let eta = &design * beta;
            let mut nll = 0.0;
            for i in 0..n {
                nll += w[i] * (log1p_exp(eta[i]) - yv[i] * eta[i]);
            }
            let pen: f64 = beta.iter().skip(1).map(|b| b * b).sum();
            nll + 0.5 * lambda * pen
        };

        let wsum: f64 = w.iter().sum();
        let pbar = (yv.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum).clamp(1e-6, 1.0 - 1e-6);
        let mut beta = DVector::<f64>::zeros(p);
        beta[0] = (pbar / (1.0 - pbar)).ln();
        let mut f = objective(&beta);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < LOGISTIC_MAX_ITER {
            let eta = &design * &beta;
            let mut grad = DVector::<f64>::zeros(p);
            let mut hess = DMatrix::<f64>::zeros(p, p);
            for i in 0..n {
                let mu = sigmoid(eta[i]);
                let r = w[i] * (mu - yv[i]);
                let h = w[i] * mu * (1.0 - mu);
                let row = design.row(i);
                for a in 0..p {
                    grad[a] += r * row[a];
                    let ha = h * row[a];
                    if ha == 0.0 {
                        continue;
                    }
                    for b in a..p {
                        hess[(a, b)] += ha * row[b];
                    }
                }
            }
            for a in 1..p {
                grad[a] += lambda * beta[a];
                hess[(a, a)] += lambda;
            }
            for a in 0..p {
                for b in 0..a {
                    hess[(a, b)] = hess[(b, a)];
                }
            }
            if grad.norm() <= LOGISTIC_GRAD_TOL {
                converged = true;
                break;
            }
            // constant columns have an all-zero Hessian row
            for a in 0..p {
                hess[(a, a)] += 1e-10;
            }
            let step = match hess.clone().cholesky() {
                Some(c) => c.solve(&grad),
                None => solve_pseudo_inverse(hess, &grad),
            };
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let cand = &beta - &step * t;
                let fc = objective(&cand);
                if fc <= f {
                    beta = cand;
                    improved = fc < f;
                    f = fc;
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            if !improved {
                // no further decrease representable in floating point
                converged = true;
                break;
            }
        }
        let (coefficients, intercept) = st.unscale(&beta.as_slice()[1..], beta[0]);
        Ok(Self {
            coefficients,
            intercept,
            iterations,
            converged,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.intercept + row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>())
    }
}
