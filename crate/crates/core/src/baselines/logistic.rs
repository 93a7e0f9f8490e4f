use serde::{Deserialize, Serialize};

use crate::error::{dims, NimoError, Result};
use crate::numerics::{dot, sigmoid, softplus, Cholesky, DenseMatrix};

/// Minimizer of `Σ[log(1+e^η) − yη] + (l2/2)‖β‖² + l1‖β‖₁` with an
/// unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub l2: f64,
    pub l1: f64,
    /// Largest violation of the (sub)gradient optimality conditions.
    pub stationarity: f64,
    pub iterations: usize,
    /// Coefficient norms diverged: the classes are (quasi) separable.
    pub separable: bool,
}

impl LogisticFit {
    pub fn linear_predictor(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        Ok(x.mul_vec(&self.coefficients)?.into_iter().map(|v| v + self.intercept).collect())
    }

    pub fn predict_proba(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        Ok(self.linear_predictor(x)?.into_iter().map(sigmoid).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Coefficient magnitude treated as divergence.
    pub divergence: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, divergence: 1e4 }
    }
}

struct Problem<'a> {
    x: &'a DenseMatrix,
    y: &'a [f64],
    l2: f64,
    l1: f64,
}

impl Problem<'_> {
    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        (0..self.x.rows()).map(|i| b0 + dot(self.x.row(i), beta)).collect()
    }

    fn objective(&self, b0: f64, beta: &[f64]) -> f64 {
        let nll: f64 = self.eta(b0, beta).iter().zip(self.y).map(|(&e, &t)| softplus(e) - t * e).sum();
        nll + 0.5 * self.l2 * dot(beta, beta) + self.l1 * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Smooth-part gradient `(∂/∂β0, ∂/∂β)`.
    fn gradient(&self, b0: f64, beta: &[f64]) -> (f64, Vec<f64>) {
        let resid: Vec<f64> = self.eta(b0, beta).iter().zip(self.y).map(|(&e, &t)| sigmoid(e) - t).collect();
        let g0 = resid.iter().sum();
        let g = self
            .x
            .t_mul_vec(&resid)
            .expect("shape checked")
            .iter()
            .zip(beta)
            .map(|(g, b)| g + self.l2 * b)
            .collect();
        (g0, g)
    }

    fn stationarity(&self, b0: f64, beta: &[f64]) -> f64 {
        let (g0, g) = self.gradient(b0, beta);
        g.iter()
            .zip(beta)
            .map(|(&g, &b)| {
                if b != 0.0 {
                    (g + self.l1 * b.signum()).abs()
                } else {
                    (g.abs() - self.l1).max(0.0)
                }
            })
            .fold(g0.abs(), f64::max)
    }

    /// Minimizer of the local quadratic model, with coordinate descent when
    /// the L1 term is active.
    fn newton_target(&self, b0: f64, beta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (n, d) = self.x.shape();
        let eta = self.eta(b0, beta);
        let pi: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = pi.iter().map(|p| (p * (1.0 - p)).max(1e-12)).collect();
        let z: Vec<f64> = (0..n).map(|i| eta[i] + (self.y[i] - pi[i]) / w[i]).collect();
        let xa = DenseMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { self.x[(i, j - 1)] });
        let mut h = xa.weighted_gram(Some(&w))?;
        for j in 1..=d {
            h.as_mut_slice()[j * (d + 1) + j] += self.l2;
        }
        let wz: Vec<f64> = w.iter().zip(&z).map(|(a, b)| a * b).collect();
        let rhs = xa.t_mul_vec(&wz)?;
        if self.l1 == 0.0 {
            let sol = Cholesky::factor(&h)?.solve(&rhs)?;
            return Ok((sol[0], sol[1..].to_vec()));
        }
        // Minimize ½ vᵀHv − rhsᵀv + l1‖v[1..]‖₁ by coordinate descent.
        let k = d + 1;
        let mut v: Vec<f64> = std::iter::once(b0).chain(beta.iter().copied()).collect();
        let mut hv = h.mul_vec(&v)?;
        for _ in 0..10_000 {
            let mut change: f64 = 0.0;
            for j in 0..k {
                let hjj = h[(j, j)];
                let rho = rhs[j] - (hv[j] - hjj * v[j]);
                let new = if j == 0 {
                    rho / hjj
                } else if rho > self.l1 {
                    (rho - self.l1) / hjj
                } else if rho < -self.l1 {
                    (rho + self.l1) / hjj
                } else {
                    0.0
                };
                let delta = new - v[j];
                if delta != 0.0 {
                    for (m, hm) in hv.iter_mut().enumerate() {
                        *hm += h[(m, j)] * delta;
                    }
                    v[j] = new;
                    change = change.max(delta.abs());
                }
            }
            if change < 1e-14 * (1.0 + v.iter().map(|a| a.abs()).fold(0.0, f64::max)) {
                break;
            }
        }
        Ok((v[0], v[1..].to_vec()))
    }
}

/// Damped (proximal) Newton iterations on the penalized likelihood.
pub fn logistic_newton(
    x: &DenseMatrix,
    y: &[f64],
    l2: f64,
    l1: f64,
    opts: LogisticOptions,
) -> Result<LogisticFit> {
    if y.len() != x.rows() {
        return Err(dims(x.rows(), y.len()));
    }
    if y.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(NimoError::InvalidArgument("labels must be 0 or 1".into()));
    }
    if !(l2 >= 0.0 && l1 >= 0.0) {
        return Err(NimoError::InvalidArgument("penalties must be non-negative".into()));
    }
    let p = Problem { x, y, l2, l1 };
    let d = x.cols();
    let ybar = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let mut b0 = if ybar > 0.0 && ybar < 1.0 { (ybar / (1.0 - ybar)).ln() } else { 0.0 };
    let mut beta = vec![0.0; d];
    let mut obj = p.objective(b0, &beta);
    let mut separable = false;
    let mut iterations = 0;
    let scale = 1.0 + y.len() as f64;

    while iterations < opts.max_iter {
        if p.stationarity(b0, &beta) <= opts.tol * scale {
            break;
        }
        iterations += 1;
        let (t0, target) = p.newton_target(b0, &beta)?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let c0 = b0 + step * (t0 - b0);
            let cand: Vec<f64> = beta.iter().zip(&target).map(|(b, t)| b + step * (t - b)).collect();
            let o = p.objective(c0, &cand);
            if o <= obj {
                b0 = c0;
                beta = cand;
                accepted = o < obj;
                obj = o;
                break;
            }
            step *= 0.5;
        }
        if beta.iter().chain(std::iter::once(&b0)).any(|v| v.abs() > opts.divergence) {
            separable = true;
            break;
        }
        if !accepted {
            break;
        }
    }
    if !obj.is_finite() {
        return Err(NimoError::NonFinite("logistic objective"));
    }
    if l2 == 0.0 && !separable {
        // Perfect fit without a ridge term only happens by running off to infinity.
        separable = p.eta(b0, &beta).iter().zip(y).all(|(&e, &t)| (sigmoid(e) - t).abs() < 1e-6);
    }
    Ok(LogisticFit {
        intercept: b0,
        stationarity: p.stationarity(b0, &beta),
        coefficients: beta,
        l2,
        l1,
        iterations,
        separable,
    })
}
