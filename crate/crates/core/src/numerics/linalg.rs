//! Cholesky-based solvers for the small symmetric positive definite systems
//! that appear in every closed-form coefficient update.

use super::matrix::{norm_inf, DenseMatrix};
use crate::error::{dims, NimoError, Result};

const JITTER_START: f64 = 1e-10;
const JITTER_GROWTH: f64 = 10.0;
const JITTER_RETRIES: usize = 5;

/// Lower-triangular Cholesky factor `L` with `A + jitter·I = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Factors `a`, retrying with diagonal jitter 1e-10, 1e-9, ..., 1e-6
    /// (relative to the mean diagonal when that exceeds one).
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(dims("square matrix", format!("{:?}", a.shape())));
        }
        if !a.is_finite() {
            return Err(NimoError::NonFinite("spd system"));
        }
        if let Some(l) = try_factor(a, 0.0) {
            return Ok(Self { n, lower: l, jitter: 0.0 });
        }
        let mean_diag = (0..n).map(|i| a[(i, i)].abs()).sum::<f64>() / n.max(1) as f64;
        let scale = mean_diag.max(1.0);
        let mut jitter = JITTER_START;
        for _ in 0..JITTER_RETRIES {
            if let Some(l) = try_factor(a, jitter * scale) {
                return Ok(Self {
                    n,
                    lower: l,
                    jitter: jitter * scale,
                });
            }
            jitter *= JITTER_GROWTH;
        }
        Err(NimoError::NotSpd)
    }

    /// Diagonal jitter that was needed for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(dims(n, b.len()));
        }
        let l = &self.lower;
        let mut x = b.to_vec();
        // L z = b
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= l[i * n + k] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        // Lᵀ x = z
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        Ok(x)
    }
}

fn try_factor(a: &DenseMatrix, jitter: f64) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows() {
        return Err(dims(a.rows(), b.len()));
    }
    Cholesky::factor(a)?.solve(b)
}

/// Ridge estimate `(BᵀB + λI)⁻¹ Bᵀ y`.
pub fn ridge_closed_form(b: &DenseMatrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0) {
        return Err(NimoError::InvalidArgument(format!(
            "ridge penalty must be non-negative, got {lambda}"
        )));
    }
    if y.len() != b.rows() {
        return Err(dims(b.rows(), y.len()));
    }
    let mut gram = b.gram();
    for i in 0..gram.rows() {
        gram[(i, i)] += lambda;
    }
    let rhs = b.t_mul_vec(y)?;
    if lambda == 0.0 {
        // An unpenalized rank-deficient design must fail rather than be
        // silently regularized by jitter.
        let chol = try_factor(&gram, 0.0).ok_or(NimoError::NotSpd)?;
        let n = gram.rows();
        let factor = Cholesky { n, lower: chol, jitter: 0.0 };
        let beta = factor.solve(&rhs)?;
        let min_pivot = (0..n).map(|i| factor.lower[i * n + i]).fold(f64::INFINITY, f64::min);
        let max_pivot = (0..n).map(|i| factor.lower[i * n + i]).fold(0.0, f64::max);
        if n > 0 && min_pivot <= 1e-7 * max_pivot {
            return Err(NimoError::NotSpd);
        }
        return Ok(beta);
    }
    solve_spd(&gram, &rhs)
}

/// `‖Ax − b‖∞ / (1 + ‖b‖∞)`.
pub fn relative_residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x).expect("shape checked by caller");
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    norm_inf(&r) / (1.0 + norm_inf(b))
}
