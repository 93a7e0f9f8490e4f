//! Reference methods used as comparison rows and as test oracles.

mod lasso;
mod logistic;
mod mlp;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::{dot, mean, ridge_closed_form, DenseMatrix};

pub use lasso::{lasso_cd, lasso_cd_from, lasso_null_penalty, lasso_path, LassoFit, LassoOptions};
pub use logistic::{logistic_newton, LogisticFit, LogisticOptions};
pub use mlp::{fit_mlp_baseline, MlpBaselineFit, MlpConfig};

/// Ridge regression with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
}

impl RidgeFit {
    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        Ok(x.mul_vec(&self.coefficients)?.into_iter().map(|v| v + self.intercept).collect())
    }
}

pub fn fit_ridge(x: &DenseMatrix, y: &[f64], lambda: f64) -> Result<RidgeFit> {
    let means: Vec<f64> = (0..x.cols()).map(|j| mean(&x.column(j))).collect();
    let ym = mean(y);
    let xc = DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] - means[j]);
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let coefficients = ridge_closed_form(&xc, &yc, lambda)?;
    Ok(RidgeFit { intercept: ym - dot(&means, &coefficients), coefficients, lambda })
}
