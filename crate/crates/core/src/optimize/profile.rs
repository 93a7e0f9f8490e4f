use super::closed_form::{scale_penalty, scale_penalty_grad};
use super::irls::{irls_gamma_update, irls_working_quantities};
use super::{GradientMode, PenaltyState};
use crate::error::{dims, NimoError, Result};
use crate::mlp::{backward, forward_matrix, group_penalty, NetworkConfig, NetworkGradients, NetworkParams};
use crate::model::design_matrix_from;
use crate::numerics::{sigmoid, softplus, Cholesky, DenseMatrix, SeededRng};

/// Closed-form coefficients for one design matrix and the gradients of the
/// profile loss with respect to that design and the scale vector.
#[derive(Debug, Clone)]
pub struct RegressionEval {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    /// `ȳ − B̄ᵀβ̂`, the unpenalized offset fitted jointly with `β̂`.
    pub intercept: f64,
    pub residual: Vec<f64>,
    /// `‖y − β̂₀ − Bβ̂‖² + μ̃ Σ c^{2δ}`.
    pub loss: f64,
    pub grad_b: DenseMatrix,
    pub grad_c: Vec<f64>,
}

pub fn regression_profile(
    b: &DenseMatrix,
    y: &[f64],
    penalty: &PenaltyState,
    mode: GradientMode,
) -> Result<RegressionEval> {
    let (n, d) = b.shape();
    if y.len() != n {
        return Err(dims(n, y.len()));
    }
    if penalty.c.len() != d {
        return Err(dims(d, penalty.c.len()));
    }
    let c = &penalty.c;
    // Centering both sides profiles out an unpenalized intercept. The residual
    // then sums to zero, so the gradients below need no extra projection.
    let b_mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| b[(i, j)]).sum::<f64>() / n as f64).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let bc = DenseMatrix::from_fn(n, d, |i, j| b[(i, j)] - b_mean[j]);
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let m = bc.scale_columns(c)?;
    let mut a = m.gram();
    for j in 0..d {
        a.as_mut_slice()[j * d + j] += penalty.lambda;
    }
    let chol = Cholesky::factor(&a)?;
    let gamma = chol.solve(&m.t_mul_vec(&yc)?)?;
    let fit = m.mul_vec(&gamma)?;
    let residual: Vec<f64> = yc.iter().zip(&fit).map(|(a, f)| a - f).collect();
    let rss: f64 = residual.iter().map(|r| r * r).sum();
    let loss = rss + scale_penalty(c, penalty.mu, penalty.delta);

    // ∂L/∂M for M = B D_c.
    let grad_m = match mode {
        GradientMode::StopGradient => {
            DenseMatrix::from_fn(n, d, |i, j| -2.0 * residual[i] * gamma[j])
        }
        GradientMode::ThroughSolve => {
            // dγ = A⁻¹(dMᵀr − MᵀdM γ), so with v = A⁻¹Mᵀr:
            // ∂L/∂M = −2 (r γᵀ + r vᵀ − (Mv) γᵀ).
            let v = chol.solve(&m.t_mul_vec(&residual)?)?;
            let mv = m.mul_vec(&v)?;
            DenseMatrix::from_fn(n, d, |i, j| {
                -2.0 * (residual[i] * gamma[j] + residual[i] * v[j] - mv[i] * gamma[j])
            })
        }
    };
    let grad_b = DenseMatrix::from_fn(n, d, |i, j| grad_m[(i, j)] * c[j]);
    let mut grad_c = scale_penalty_grad(c, penalty.mu, penalty.delta);
    for i in 0..n {
        for j in 0..d {
            grad_c[j] += grad_m[(i, j)] * bc[(i, j)];
        }
    }
    let beta: Vec<f64> = c.iter().zip(&gamma).map(|(c, g)| c * g).collect();
    let intercept = y_mean - b_mean.iter().zip(&beta).map(|(m, b)| m * b).sum::<f64>();
    Ok(RegressionEval { gamma, beta, intercept, residual, loss, grad_b, grad_c })
}

/// Full regression objective `‖y − B_u β̂‖² + μ̃ Σ c^{2δ} + λ_group Σ_j ‖w_j‖₂`
/// with gradients for the network and the scale vector.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub profile: RegressionEval,
    pub loss: f64,
    pub grad_params: NetworkGradients,
    pub design: DenseMatrix,
}

pub fn regression_objective(
    params: &NetworkParams,
    cfg: &NetworkConfig,
    x: &DenseMatrix,
    y: &[f64],
    penalty: &PenaltyState,
    mode: GradientMode,
    rng: &mut SeededRng,
) -> Result<ObjectiveEval> {
    let (g, cache) = forward_matrix(params, cfg, x, rng)?;
    let design = design_matrix_from(x, &g)?;
    let profile = regression_profile(&design, y, penalty, mode)?;
    let upstream = DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| profile.grad_b[(i, j)] * x[(i, j)]);
    let mut grad_params = backward(params, &cache, &upstream)?;
    let (group, group_grad) = group_penalty(params, cfg, penalty.lambda_group);
    grad_params.add_scaled(&group_grad, 1.0);
    let loss = profile.loss + group;
    if !loss.is_finite() {
        return Err(NimoError::NonFinite("profile loss"));
    }
    Ok(ObjectiveEval { profile, loss, grad_params, design })
}

/// One IRLS refinement followed by the loss at the refreshed coefficients.
#[derive(Debug, Clone)]
pub struct LogisticEval {
    pub intercept: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    /// Summed binary cross-entropy plus `μ̃ Σ c^{2δ}`.
    pub loss: f64,
    pub grad_b: DenseMatrix,
    pub grad_c: Vec<f64>,
}

/// Takes one weighted-ridge step from `(prev_intercept, prev_beta)`, then
/// evaluates the loss with `γ` and the intercept held fixed for the gradient.
pub fn logistic_profile(
    b: &DenseMatrix,
    y: &[f64],
    penalty: &PenaltyState,
    prev_beta: &[f64],
    prev_intercept: f64,
) -> Result<LogisticEval> {
    let (n, d) = b.shape();
    let state = irls_working_quantities(b, prev_beta, prev_intercept, y)?;
    let c = &penalty.c;
    let (intercept, gamma) = irls_gamma_update(b, c, &state, penalty.lambda, true)?;
    let beta: Vec<f64> = c.iter().zip(&gamma).map(|(c, g)| c * g).collect();
    let eta: Vec<f64> = b.mul_vec(&beta)?.into_iter().map(|v| v + intercept).collect();
    let bce: f64 = eta.iter().zip(y).map(|(&e, &t)| softplus(e) - t * e).sum();
    let loss = bce + scale_penalty(c, penalty.mu, penalty.delta);
    let d_eta: Vec<f64> = eta.iter().zip(y).map(|(&e, &t)| sigmoid(e) - t).collect();
    let grad_b = DenseMatrix::from_fn(n, d, |i, j| d_eta[i] * beta[j]);
    let mut grad_c = scale_penalty_grad(c, penalty.mu, penalty.delta);
    for i in 0..n {
        for j in 0..d {
            grad_c[j] += d_eta[i] * b[(i, j)] * gamma[j];
        }
    }
    Ok(LogisticEval { intercept, gamma, beta, eta, loss, grad_b, grad_c })
}
