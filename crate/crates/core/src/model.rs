//! Fitted models: predictions, effective coefficients and persistence.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{dims, NimoError, Result};
use crate::mlp::{first_layer_norms, forward_values, NetworkConfig, NetworkParams};
use crate::numerics::{sigmoid, DenseMatrix, SeededRng, StandardizationStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Logistic,
}

/// `f(x) = β0 + Σ_j x_j β_j (1 + g(x_{-j}))` on standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub params: NetworkParams,
    pub cfg: NetworkConfig,
    pub stats: StandardizationStats,
    pub task: Task,
}

/// Per-sample coefficients `β_j (1 + g(x_{-j}))`, one row per input row.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCoefficients(pub DenseMatrix);

/// `B[i][j] = X[i][j] (1 + G[i][j])`.
pub fn design_matrix_from(x: &DenseMatrix, g: &DenseMatrix) -> Result<DenseMatrix> {
    if x.shape() != g.shape() {
        return Err(dims(format!("{:?}", x.shape()), format!("{:?}", g.shape())));
    }
    Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * (1.0 + g[(i, j)])))
}

/// Evaluates the network on `x` and forms the modified design matrix.
pub fn design_matrix(
    params: &NetworkParams,
    cfg: &NetworkConfig,
    x: &DenseMatrix,
    rng: &mut SeededRng,
) -> Result<DenseMatrix> {
    let g = forward_values(params, cfg, x, rng)?;
    design_matrix_from(x, &g)
}

impl FittedModel {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.cfg.input_dim != d || self.stats.dim() != d {
            return Err(dims(d, format!("network {} / stats {}", self.cfg.input_dim, self.stats.dim())));
        }
        if !self.intercept.is_finite() || self.coefficients.iter().any(|b| !b.is_finite()) {
            return Err(NimoError::NonFinite("coefficients"));
        }
        self.params.validate(&self.cfg)
    }

    fn eval_cfg(&self) -> NetworkConfig {
        self.cfg.with_train_mode(false)
    }

    /// Correction matrix `G` for raw inputs, noise disabled.
    pub fn corrections(&self, x_raw: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
        if x_raw.cols() != self.dim() {
            return Err(dims(self.dim(), x_raw.cols()));
        }
        let z = self.stats.apply(x_raw)?;
        let g = forward_values(&self.params, &self.eval_cfg(), &z, &mut SeededRng::new(0, 0))?;
        Ok((z, g))
    }

    /// Linear predictor `β0 + Bβ`.
    pub fn linear_predictor(&self, x_raw: &DenseMatrix) -> Result<Vec<f64>> {
        let (z, g) = self.corrections(x_raw)?;
        let b = design_matrix_from(&z, &g)?;
        Ok(b.mul_vec(&self.coefficients)?.into_iter().map(|v| v + self.intercept).collect())
    }

    /// Regression predictions, or class-one probabilities for the logistic task.
    pub fn predict(&self, x_raw: &DenseMatrix) -> Result<Vec<f64>> {
        let eta = self.linear_predictor(x_raw)?;
        Ok(match self.task {
            Task::Regression => eta,
            Task::Logistic => eta.into_iter().map(sigmoid).collect(),
        })
    }

    pub fn effective_coefficients(&self, x_raw: &DenseMatrix) -> Result<EffectiveCoefficients> {
        let (_, g) = self.corrections(x_raw)?;
        Ok(EffectiveCoefficients(DenseMatrix::from_fn(g.rows(), g.cols(), |i, j| {
            self.coefficients[j] * (1.0 + g[(i, j)])
        })))
    }

    /// Coefficients on the original feature scale, `β_j / σ_j`.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.stats.stddevs)
            .map(|(b, s)| b / s)
            .collect()
    }

    /// Euclidean norms of the first-layer columns of each input feature.
    pub fn first_layer_norms(&self) -> Vec<f64> {
        first_layer_norms(&self.params, &self.cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: FittedModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl EffectiveCoefficients {
    /// `β0 + Σ_j entry(i,j) · x_ij` using standardized inputs.
    pub fn reconstruct(&self, intercept: f64, x_std: &DenseMatrix) -> Vec<f64> {
        (0..x_std.rows())
            .map(|i| intercept + (0..x_std.cols()).map(|j| self.0[(i, j)] * x_std[(i, j)]).sum::<f64>())
            .collect()
    }
}
