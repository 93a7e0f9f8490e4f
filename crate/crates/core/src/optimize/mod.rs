//! Profile-likelihood training: closed-form coefficient updates alternated
//! with first-order steps on the scale vector `c` and the network.

mod adam;
mod closed_form;
mod grid;
mod irls;
mod profile;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{NimoError, Result};

pub use adam::{optimizer_step, project_positive, Optimizer, OptimizerState, C_FLOOR};
pub use closed_form::{
    fit_adaptive_ridge, gamma_closed_form, profile_loss_regression, scale_penalty, scale_penalty_grad,
    AdaptiveRidgeFit,
};
pub use grid::{default_lambda_grid, default_mu_grid, grid_points, grid_search, log_grid, GridPoint, GridResult};
pub use irls::{irls_gamma_update, irls_working_quantities, IrlsState, PI_CLAMP};
pub use profile::{
    logistic_profile, regression_objective, regression_profile, LogisticEval, ObjectiveEval, RegressionEval,
};
pub use train::{
    train_classification, train_classification_from, train_regression, train_regression_from, TraceRecord,
    TrainData, TrainOutcome,
};

/// Coefficients with magnitude below this count as zero in sparsity reports.
pub const ZERO_THRESHOLD: f64 = 1e-3;

/// Scale vector, auxiliary coefficients and penalty weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyState {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Ridge weight on `γ`.
    pub lambda: f64,
    /// Weight of `Σ c_i^{2δ}`.
    pub mu: f64,
    pub delta: f64,
    pub lambda_group: f64,
}

impl PenaltyState {
    /// `c = 1`, `γ = 0`.
    pub fn new(d: usize, lambda: f64, mu: f64, delta: f64, lambda_group: f64) -> Self {
        Self {
            c: vec![1.0; d],
            gamma: vec![0.0; d],
            lambda,
            mu,
            delta,
            lambda_group,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.len() != self.gamma.len() {
            return Err(crate::error::dims(self.c.len(), self.gamma.len()));
        }
        if self.c.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(NimoError::InvalidArgument("scale vector must be positive".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(NimoError::InvalidArgument("lambda must be positive".into()));
        }
        if !(self.mu >= 0.0 && self.lambda_group >= 0.0) {
            return Err(NimoError::InvalidArgument("penalties must be non-negative".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(NimoError::InvalidArgument("delta must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Same state with `λ`, `μ̃` and `λ_group` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lambda: self.lambda * factor,
            mu: self.mu * factor,
            lambda_group: self.lambda_group * factor,
            ..self.clone()
        }
    }

    pub fn beta(&self) -> Vec<f64> {
        self.c.iter().zip(&self.gamma).map(|(c, g)| c * g).collect()
    }
}

/// How the coefficient solve enters the gradient of the profile loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// `γ̂` is held fixed during the gradient step.
    #[default]
    StopGradient,
    /// Differentiates through `γ̂(c, u)`.
    ThroughSolve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_iters: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Stop after this many iterations without validation improvement.
    pub patience: Option<usize>,
    pub optimizer: Optimizer,
    pub gradient_mode: GradientMode,
    pub freeze_network: bool,
    pub freeze_scale: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            learning_rate: 1e-3,
            seed: 0,
            patience: Some(50),
            optimizer: Optimizer::Adam,
            gradient_mode: GradientMode::StopGradient,
            freeze_network: false,
            freeze_scale: false,
            trace_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(NimoError::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NimoError::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}
