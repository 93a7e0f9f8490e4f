use std::io::Write;

use serde::{Deserialize, Serialize};

use super::adam::{optimizer_step, project_positive, OptimizerState};
use super::profile::{logistic_profile, regression_objective, regression_profile};
use super::{PenaltyState, TrainConfig, ZERO_THRESHOLD};
use crate::error::{dims, NimoError, Result};
use crate::mlp::{backward, forward_matrix, group_penalty, NetworkConfig, NetworkParams};
use crate::model::{design_matrix, design_matrix_from, FittedModel, Task};
use crate::numerics::{mean, softplus, DenseMatrix, SeededRng, StandardizationStats};

const STREAM_INIT: u64 = 1;
const STREAM_NOISE: u64 = 2;

/// Standardized training and validation data with the stats that produced it.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub x_train: DenseMatrix,
    pub y_train: Vec<f64>,
    pub x_val: DenseMatrix,
    pub y_val: Vec<f64>,
    pub stats: StandardizationStats,
}

impl TrainData {
    fn check(&self) -> Result<()> {
        let d = self.x_train.cols();
        if self.y_train.len() != self.x_train.rows() {
            return Err(dims(self.x_train.rows(), self.y_train.len()));
        }
        if self.y_val.len() != self.x_val.rows() {
            return Err(dims(self.x_val.rows(), self.y_val.len()));
        }
        if self.x_val.cols() != d || self.stats.dim() != d {
            return Err(dims(d, format!("{} / {}", self.x_val.cols(), self.stats.dim())));
        }
        if self.x_train.rows() == 0 {
            return Err(NimoError::InsufficientRows { needed: 1, available: 0 });
        }
        Ok(())
    }
}

/// One line of the loss trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Coefficients with `|β_j| ≥ ZERO_THRESHOLD`.
    pub nonzero: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the lowest validation loss.
    pub model: FittedModel,
    /// Scale and auxiliary vectors of that snapshot.
    pub penalty: PenaltyState,
    pub trace: Vec<TraceRecord>,
    pub best_iteration: usize,
    pub best_val_loss: f64,
    pub iterations: usize,
    /// Set when the labels carry no signal (all equal).
    pub degenerate: bool,
}

struct Snapshot {
    params: NetworkParams,
    penalty: PenaltyState,
    beta: Vec<f64>,
    intercept: f64,
    iteration: usize,
    val_loss: f64,
}

fn nonzero(beta: &[f64]) -> usize {
    beta.iter().filter(|b| b.abs() >= ZERO_THRESHOLD).count()
}

fn write_trace(tc: &TrainConfig, trace: &[TraceRecord]) -> Result<()> {
    if let Some(path) = &tc.trace_path {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for rec in trace {
            writeln!(out, "{}", serde_json::to_string(rec)?)?;
        }
        out.flush()?;
    }
    Ok(())
}

struct Stepper {
    u: OptimizerState,
    c: OptimizerState,
}

impl Stepper {
    fn new(tc: &TrainConfig, params: &NetworkParams, d: usize) -> Self {
        Self {
            u: OptimizerState::new(tc.optimizer, tc.learning_rate, params.num_params()),
            c: OptimizerState::new(tc.optimizer, tc.learning_rate, d),
        }
    }

    fn step(
        &mut self,
        tc: &TrainConfig,
        params: &mut NetworkParams,
        grad_params: Option<&NetworkParams>,
        penalty: &mut PenaltyState,
        grad_c: &[f64],
    ) -> Result<()> {
        if let (false, Some(g)) = (tc.freeze_network, grad_params) {
            let mut flat = params.to_flat();
            optimizer_step(&mut flat, &g.to_flat(), &mut self.u);
            params.set_flat(&flat)?;
        }
        if !tc.freeze_scale {
            optimizer_step(&mut penalty.c, grad_c, &mut self.c);
            project_positive(&mut penalty.c);
        }
        Ok(())
    }
}

fn validate_inputs(data: &TrainData, cfg: &NetworkConfig, tc: &TrainConfig, penalty: &PenaltyState) -> Result<()> {
    data.check()?;
    tc.validate()?;
    cfg.validate()?;
    penalty.validate()?;
    let d = data.x_train.cols();
    if cfg.input_dim != d || penalty.c.len() != d {
        return Err(dims(d, format!("network {} / scales {}", cfg.input_dim, penalty.c.len())));
    }
    Ok(())
}

fn initial_params(cfg: &NetworkConfig, tc: &TrainConfig) -> NetworkParams {
    NetworkParams::init(cfg, &mut SeededRng::new(tc.seed, STREAM_INIT))
}

/// Regression training from a freshly initialized network.
pub fn train_regression(
    data: &TrainData,
    cfg: &NetworkConfig,
    tc: &TrainConfig,
    penalty: PenaltyState,
) -> Result<TrainOutcome> {
    train_regression_from(data, cfg, tc, penalty, initial_params(cfg, tc))
}

/// Alternates the closed-form `γ̂` with gradient steps on `c` and the network.
/// Penalty weights are per training row: the solver sees them multiplied by `n`,
/// which is the same as minimizing the mean squared error.
/// The intercept is unpenalized and profiled out with `γ̂`.
pub fn train_regression_from(
    data: &TrainData,
    cfg: &NetworkConfig,
    tc: &TrainConfig,
    mut penalty: PenaltyState,
    mut params: NetworkParams,
) -> Result<TrainOutcome> {
    validate_inputs(data, cfg, tc, &penalty)?;
    params.validate(cfg)?;
    let weights = penalty.clone();
    let n = data.x_train.rows() as f64;
    penalty = penalty.scaled(n);
    let d = data.x_train.cols();
    let y_mean = mean(&data.y_train);
    let yc: Vec<f64> = data.y_train.iter().map(|v| v - y_mean).collect();
    let yv: Vec<f64> = data.y_val.iter().map(|v| v - y_mean).collect();
    let train_cfg = cfg.with_train_mode(true);
    let eval_cfg = cfg.with_train_mode(false);
    let mut noise = SeededRng::new(tc.seed, STREAM_NOISE);
    let mut eval_rng = SeededRng::new(tc.seed, 0);

    let frozen = if tc.freeze_network {
        let bt = design_matrix(&params, &eval_cfg, &data.x_train, &mut eval_rng)?;
        let bv = design_matrix(&params, &eval_cfg, &data.x_val, &mut eval_rng)?;
        let (group, _) = group_penalty(&params, cfg, penalty.lambda_group);
        Some((bt, bv, group))
    } else {
        None
    };

    let mut stepper = Stepper::new(tc, &params, d);
    let mut trace = Vec::new();
    let mut best: Option<Snapshot> = None;
    let mut since_best = 0;
    let mut iterations = 0;

    for it in 1..=tc.max_iters {
        iterations = it;
        let (loss, beta, offset, gamma, grad_params, grad_c, b_val) = match &frozen {
            Some((bt, bv, group)) => {
                let ev = regression_profile(bt, &yc, &penalty, tc.gradient_mode)?;
                (ev.loss + group, ev.beta, ev.intercept, ev.gamma, None, ev.grad_c, bv.clone())
            }
            None => {
                let ev = regression_objective(&params, &train_cfg, &data.x_train, &yc, &penalty, tc.gradient_mode, &mut noise)
                    .map_err(|e| match e {
                        NimoError::NonFinite(_) => NimoError::Diverged { iteration: it },
                        other => other,
                    })?;
                let bv = design_matrix(&params, &eval_cfg, &data.x_val, &mut eval_rng)?;
                let p = ev.profile;
                (ev.loss, p.beta, p.intercept, p.gamma, Some(ev.grad_params), p.grad_c, bv)
            }
        };
        penalty.gamma = gamma;
        let pred = b_val.mul_vec(&beta)?;
        let val_loss = if yv.is_empty() {
            loss
        } else {
            yv.iter().zip(&pred).map(|(a, p)| (a - offset - p).powi(2)).sum::<f64>() / yv.len() as f64
        };
        if !loss.is_finite() || !val_loss.is_finite() {
            return Err(NimoError::Diverged { iteration: it });
        }
        trace.push(TraceRecord { iteration: it, train_loss: loss / n, val_loss, nonzero: nonzero(&beta) });

        if best.as_ref().is_none_or(|b| val_loss < b.val_loss) {
            best = Some(Snapshot {
                params: params.clone(),
                penalty: penalty.clone(),
                beta,
                intercept: y_mean + offset,
                iteration: it,
                val_loss,
            });
            since_best = 0;
        } else {
            since_best += 1;
        }
        if tc.patience.is_some_and(|p| since_best >= p) {
            break;
        }
        if it < tc.max_iters {
            stepper.step(tc, &mut params, grad_params.as_ref(), &mut penalty, &grad_c)?;
        }
    }
    write_trace(tc, &trace)?;
    let best = best.expect("at least one iteration");
    Ok(finish(best, &weights, cfg, data, Task::Regression, trace, iterations, false))
}

fn finish(
    best: Snapshot,
    weights: &PenaltyState,
    cfg: &NetworkConfig,
    data: &TrainData,
    task: Task,
    trace: Vec<TraceRecord>,
    iterations: usize,
    degenerate: bool,
) -> TrainOutcome {
    TrainOutcome {
        model: FittedModel {
            intercept: best.intercept,
            coefficients: best.beta,
            params: best.params,
            cfg: cfg.with_train_mode(false),
            stats: data.stats.clone(),
            task,
        },
        penalty: PenaltyState {
            lambda: weights.lambda,
            mu: weights.mu,
            lambda_group: weights.lambda_group,
            ..best.penalty
        },
        trace,
        best_iteration: best.iteration,
        best_val_loss: best.val_loss,
        iterations,
        degenerate,
    }
}

/// Logistic training from a freshly initialized network.
pub fn train_classification(
    data: &TrainData,
    cfg: &NetworkConfig,
    tc: &TrainConfig,
    penalty: PenaltyState,
) -> Result<TrainOutcome> {
    train_classification_from(data, cfg, tc, penalty, initial_params(cfg, tc))
}

/// One IRLS refinement of `(β0, γ)` per iteration, then gradient steps on `c`
/// and the network for the cross-entropy at the refreshed coefficients.
/// Penalty weights are per training row, as in [`train_regression_from`].
pub fn train_classification_from(
    data: &TrainData,
    cfg: &NetworkConfig,
    tc: &TrainConfig,
    mut penalty: PenaltyState,
    mut params: NetworkParams,
) -> Result<TrainOutcome> {
    validate_inputs(data, cfg, tc, &penalty)?;
    params.validate(cfg)?;
    if data.y_train.iter().chain(&data.y_val).any(|&t| t != 0.0 && t != 1.0) {
        return Err(NimoError::InvalidArgument("labels must be 0 or 1".into()));
    }
    let weights = penalty.clone();
    let n = data.x_train.rows() as f64;
    penalty = penalty.scaled(n);
    let d = data.x_train.cols();
    let degenerate = data.y_train.iter().all(|&t| t == data.y_train[0]);
    let train_cfg = cfg.with_train_mode(true);
    let eval_cfg = cfg.with_train_mode(false);
    let mut noise = SeededRng::new(tc.seed, STREAM_NOISE);
    let mut eval_rng = SeededRng::new(tc.seed, 0);

    let frozen = if tc.freeze_network {
        let bt = design_matrix(&params, &eval_cfg, &data.x_train, &mut eval_rng)?;
        let bv = design_matrix(&params, &eval_cfg, &data.x_val, &mut eval_rng)?;
        let (group, _) = group_penalty(&params, cfg, penalty.lambda_group);
        Some((bt, bv, group))
    } else {
        None
    };

    let mut stepper = Stepper::new(tc, &params, d);
    let mut trace = Vec::new();
    let mut best: Option<Snapshot> = None;
    let mut since_best = 0;
    let mut iterations = 0;
    let mut beta = vec![0.0; d];
    let mut intercept = 0.0;

    for it in 1..=tc.max_iters {
        iterations = it;
        let (b_train, b_val, cache, group) = match &frozen {
            Some((bt, bv, group)) => (bt.clone(), bv.clone(), None, *group),
            None => {
                let (g, cache) = forward_matrix(&params, &train_cfg, &data.x_train, &mut noise)
                    .map_err(|_| NimoError::Diverged { iteration: it })?;
                let bt = design_matrix_from(&data.x_train, &g)?;
                let bv = design_matrix(&params, &eval_cfg, &data.x_val, &mut eval_rng)?;
                let (group, _) = group_penalty(&params, cfg, penalty.lambda_group);
                (bt, bv, Some(cache), group)
            }
        };
        let ev = logistic_profile(&b_train, &data.y_train, &penalty, &beta, intercept)?;
        beta = ev.beta.clone();
        intercept = ev.intercept;
        penalty.gamma = ev.gamma.clone();
        let loss = ev.loss + group;
        let eta_val: Vec<f64> = b_val.mul_vec(&beta)?.into_iter().map(|v| v + intercept).collect();
        let val_loss = if data.y_val.is_empty() {
            loss
        } else {
            eta_val.iter().zip(&data.y_val).map(|(&e, &t)| softplus(e) - t * e).sum::<f64>() / data.y_val.len() as f64
        };
        if !loss.is_finite() || !val_loss.is_finite() {
            return Err(NimoError::Diverged { iteration: it });
        }
        trace.push(TraceRecord { iteration: it, train_loss: loss / n, val_loss, nonzero: nonzero(&beta) });

        if best.as_ref().is_none_or(|b| val_loss < b.val_loss) {
            best = Some(Snapshot {
                params: params.clone(),
                penalty: penalty.clone(),
                beta: beta.clone(),
                intercept,
                iteration: it,
                val_loss,
            });
            since_best = 0;
        } else {
            since_best += 1;
        }
        if tc.patience.is_some_and(|p| since_best >= p) {
            break;
        }
        if it < tc.max_iters {
            let grad_params = match cache {
                Some(cache) => {
                    let x = &data.x_train;
                    let upstream = DenseMatrix::from_fn(x.rows(), d, |i, j| ev.grad_b[(i, j)] * x[(i, j)]);
                    let mut g = backward(&params, &cache, &upstream)?;
                    g.add_scaled(&group_penalty(&params, cfg, penalty.lambda_group).1, 1.0);
                    Some(g)
                }
                None => None,
            };
            stepper.step(tc, &mut params, grad_params.as_ref(), &mut penalty, &ev.grad_c)?;
        }
    }
    write_trace(tc, &trace)?;
    let best = best.expect("at least one iteration");
    Ok(finish(best, &weights, cfg, data, Task::Logistic, trace, iterations, degenerate))
}
