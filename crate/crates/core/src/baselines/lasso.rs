use serde::{Deserialize, Serialize};

use crate::error::{dims, NimoError, Result};
use crate::numerics::{dot, mean, norm_inf, DenseMatrix};

/// Solution of `½‖y − β0 − Xβ‖² + penalty·‖β‖₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub penalty: f64,
    pub dual_gap: f64,
    /// Largest violation of the optimality conditions.
    pub kkt: f64,
    pub sweeps: usize,
}

impl LassoFit {
    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        Ok(x.mul_vec(&self.coefficients)?.into_iter().map(|v| v + self.intercept).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub fit_intercept: bool,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { fit_intercept: false, tol: 1e-10, max_sweeps: 100_000 }
    }
}

/// Smallest penalty at which every coefficient is zero.
pub fn lasso_null_penalty(x: &DenseMatrix, y: &[f64], fit_intercept: bool) -> Result<f64> {
    let (xc, yc, _, _) = center(x, y, fit_intercept)?;
    Ok(norm_inf(&xc.t_mul_vec(&yc)?))
}

type Centered = (DenseMatrix, Vec<f64>, Vec<f64>, f64);

fn center(x: &DenseMatrix, y: &[f64], fit_intercept: bool) -> Result<Centered> {
    if y.len() != x.rows() {
        return Err(dims(x.rows(), y.len()));
    }
    if !fit_intercept {
        return Ok((x.clone(), y.to_vec(), vec![0.0; x.cols()], 0.0));
    }
    let means: Vec<f64> = (0..x.cols()).map(|j| mean(&x.column(j))).collect();
    let ym = mean(y);
    let xc = DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] - means[j]);
    Ok((xc, y.iter().map(|v| v - ym).collect(), means, ym))
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn kkt_violation(xtr: &[f64], beta: &[f64], penalty: f64) -> f64 {
    xtr.iter()
        .zip(beta)
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g - penalty * b.signum()).abs()
            } else {
                (g.abs() - penalty).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Cyclic coordinate descent with soft-thresholding, started from `warm`.
pub fn lasso_cd_from(
    x: &DenseMatrix,
    y: &[f64],
    penalty: f64,
    opts: LassoOptions,
    warm: Option<&[f64]>,
) -> Result<LassoFit> {
    if !(penalty >= 0.0 && penalty.is_finite()) {
        return Err(NimoError::InvalidArgument("lasso penalty must be non-negative".into()));
    }
    let (xc, yc, means, ym) = center(x, y, opts.fit_intercept)?;
    let (n, d) = xc.shape();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| xc.column(j)).collect();
    let sq: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    let mut beta = match warm {
        Some(w) if w.len() == d => w.to_vec(),
        Some(w) => return Err(dims(d, w.len())),
        None => vec![0.0; d],
    };
    let fit = xc.mul_vec(&beta)?;
    let mut r: Vec<f64> = (0..n).map(|i| yc[i] - fit[i]).collect();
    let scale = 1.0 + norm_inf(&xc.t_mul_vec(&yc)?);

    let mut sweeps = 0;
    loop {
        sweeps += 1;
        for j in 0..d {
            if sq[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let old = beta[j];
            let rho = dot(&cols[j], &r) + sq[j] * old;
            let new = soft_threshold(rho, penalty) / sq[j];
            if new != old {
                let delta = new - old;
                for (ri, xi) in r.iter_mut().zip(&cols[j]) {
                    *ri -= delta * xi;
                }
                beta[j] = new;
            }
        }
        let xtr: Vec<f64> = cols.iter().map(|c| dot(c, &r)).collect();
        let kkt = kkt_violation(&xtr, &beta, penalty);
        if kkt <= opts.tol * scale {
            let l1: f64 = beta.iter().map(|b| b.abs()).sum();
            let primal = 0.5 * dot(&r, &r) + penalty * l1;
            let dual_scale = if penalty > 0.0 {
                let m = norm_inf(&xtr);
                if m > penalty { penalty / m } else { 1.0 }
            } else {
                1.0
            };
            let theta: Vec<f64> = r.iter().map(|v| v * dual_scale).collect();
            let dual = 0.5 * dot(&yc, &yc)
                - 0.5 * yc.iter().zip(&theta).map(|(a, t)| (a - t).powi(2)).sum::<f64>();
            let intercept = ym - dot(&means, &beta);
            return Ok(LassoFit {
                intercept,
                coefficients: beta,
                penalty,
                dual_gap: (primal - dual).max(0.0),
                kkt,
                sweeps,
            });
        }
        if sweeps >= opts.max_sweeps {
            return Err(NimoError::MaxIterations(sweeps));
        }
    }
}

pub fn lasso_cd(x: &DenseMatrix, y: &[f64], penalty: f64, opts: LassoOptions) -> Result<LassoFit> {
    lasso_cd_from(x, y, penalty, opts, None)
}

/// Fits each penalty in order, warm-starting from the previous solution.
pub fn lasso_path(x: &DenseMatrix, y: &[f64], penalties: &[f64], opts: LassoOptions) -> Result<Vec<LassoFit>> {
    let mut out: Vec<LassoFit> = Vec::with_capacity(penalties.len());
    for &p in penalties {
        let warm = out.last().map(|f| f.coefficients.clone());
        out.push(lasso_cd_from(x, y, p, opts, warm.as_deref())?);
    }
    Ok(out)
}
