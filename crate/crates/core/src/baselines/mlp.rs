use serde::{Deserialize, Serialize};

use crate::error::{NimoError, Result};
use crate::mlp::NetworkParams;
use crate::model::Task;
use crate::numerics::{dot, mean, sigmoid, softplus, DenseMatrix, SeededRng};
use crate::optimize::{optimizer_step, OptimizerState, TrainConfig, TrainData};

const STREAM_INIT: u64 = 11;
const STREAM_DROPOUT: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    /// Drop probability applied after each hidden activation during training.
    pub dropout: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden1: 32, hidden2: 16, dropout: 0.6 }
    }
}

/// Standalone `fc → tanh → fc → sin → fc` network on the raw feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpBaselineFit {
    pub params: NetworkParams,
    pub config: MlpConfig,
    pub task: Task,
    pub best_val_loss: f64,
    pub best_iteration: usize,
}

struct Pass {
    h1: Vec<f64>,
    m1: Vec<f64>,
    h2: Vec<f64>,
    c2: Vec<f64>,
    m2: Vec<f64>,
    out: f64,
}

fn forward_row(p: &NetworkParams, x: &[f64], masks: Option<(&[f64], &[f64])>) -> Pass {
    let (h1n, h2n) = (p.b1.len(), p.b2.len());
    let h1: Vec<f64> = (0..h1n).map(|m| (dot(p.w1.row(m), x) + p.b1[m]).tanh()).collect();
    let (m1, m2) = match masks {
        Some((a, b)) => (a.to_vec(), b.to_vec()),
        None => (vec![1.0; h1n], vec![1.0; h2n]),
    };
    let h1d: Vec<f64> = h1.iter().zip(&m1).map(|(h, m)| h * m).collect();
    let (h2, c2): (Vec<f64>, Vec<f64>) = (0..h2n)
        .map(|k| (dot(p.w2.row(k), &h1d) + p.b2[k]).sin_cos())
        .unzip();
    let out = (0..h2n).map(|k| p.w3[k] * h2[k] * m2[k]).sum::<f64>() + p.b3;
    Pass { h1, m1, h2, c2, m2, out }
}

impl MlpBaselineFit {
    /// Network output: the prediction for regression, the logit otherwise.
    pub fn raw_output(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.params.w1.cols() {
            return Err(crate::error::dims(self.params.w1.cols(), x.cols()));
        }
        Ok((0..x.rows()).map(|i| forward_row(&self.params, x.row(i), None).out).collect())
    }

    /// Regression predictions or class-one probabilities.
    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        let out = self.raw_output(x)?;
        Ok(match self.task {
            Task::Regression => out,
            Task::Logistic => out.into_iter().map(sigmoid).collect(),
        })
    }
}

fn mean_loss(task: Task, out: &[f64], y: &[f64]) -> f64 {
    let s: f64 = match task {
        Task::Regression => out.iter().zip(y).map(|(o, t)| (o - t).powi(2)).sum(),
        Task::Logistic => out.iter().zip(y).map(|(&o, &t)| softplus(o) - t * o).sum(),
    };
    s / y.len().max(1) as f64
}

/// Full-batch Adam on mean squared error or mean cross-entropy with inverted
/// dropout; returns the best-validation snapshot.
pub fn fit_mlp_baseline(data: &TrainData, cfg: &MlpConfig, tc: &TrainConfig, task: Task) -> Result<MlpBaselineFit> {
    tc.validate()?;
    if !(0.0..1.0).contains(&cfg.dropout) || cfg.hidden1 == 0 || cfg.hidden2 == 0 {
        return Err(NimoError::InvalidArgument("invalid MLP configuration".into()));
    }
    let (n, d) = data.x_train.shape();
    let mut params = NetworkParams::init_with_input(d, cfg.hidden1, cfg.hidden2, &mut SeededRng::new(tc.seed, STREAM_INIT));
    let ybar = mean(&data.y_train);
    params.b3 = match task {
        Task::Regression => ybar,
        Task::Logistic if ybar > 0.0 && ybar < 1.0 => (ybar / (1.0 - ybar)).ln(),
        Task::Logistic => 0.0,
    };
    let keep = 1.0 - cfg.dropout;
    let mut rng = SeededRng::new(tc.seed, STREAM_DROPOUT);
    let mut opt = OptimizerState::new(tc.optimizer, tc.learning_rate, params.num_params());
    let mut best: Option<(NetworkParams, f64, usize)> = None;
    let mut since_best = 0;

    for it in 1..=tc.max_iters {
        let probe = MlpBaselineFit { params: params.clone(), config: *cfg, task, best_val_loss: 0.0, best_iteration: 0 };
        let val_loss = if data.y_val.is_empty() {
            mean_loss(task, &probe.raw_output(&data.x_train)?, &data.y_train)
        } else {
            mean_loss(task, &probe.raw_output(&data.x_val)?, &data.y_val)
        };
        if !val_loss.is_finite() {
            return Err(NimoError::Diverged { iteration: it });
        }
        if best.as_ref().is_none_or(|b| val_loss < b.1) {
            best = Some((params.clone(), val_loss, it));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if tc.patience.is_some_and(|p| since_best >= p) || it == tc.max_iters {
            break;
        }

        let mut grad = NetworkParams::zeros_with_input(d, cfg.hidden1, cfg.hidden2);
        for i in 0..n {
            let x = data.x_train.row(i);
            let m1: Vec<f64> = (0..cfg.hidden1).map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 }).collect();
            let m2: Vec<f64> = (0..cfg.hidden2).map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 }).collect();
            let pass = forward_row(&params, x, Some((&m1, &m2)));
            let t = data.y_train[i];
            let go = match task {
                Task::Regression => 2.0 * (pass.out - t),
                Task::Logistic => sigmoid(pass.out) - t,
            } / n as f64;
            grad.b3 += go;
            let mut da1 = vec![0.0; cfg.hidden1];
            for k in 0..cfg.hidden2 {
                grad.w3[k] += go * pass.h2[k] * pass.m2[k];
                let a = go * params.w3[k] * pass.m2[k] * pass.c2[k];
                if a == 0.0 {
                    continue;
                }
                grad.b2[k] += a;
                let w = params.w2.row(k);
                let gw = grad.w2.row_mut(k);
                for m in 0..cfg.hidden1 {
                    gw[m] += a * pass.h1[m] * pass.m1[m];
                    da1[m] += a * w[m];
                }
            }
            for m in 0..cfg.hidden1 {
                let a = da1[m] * pass.m1[m] * (1.0 - pass.h1[m] * pass.h1[m]);
                if a == 0.0 {
                    continue;
                }
                grad.b1[m] += a;
                let gw = grad.w1.row_mut(m);
                for (g, xv) in gw.iter_mut().zip(x) {
                    *g += a * xv;
                }
            }
        }
        let mut flat = params.to_flat();
        optimizer_step(&mut flat, &grad.to_flat(), &mut opt);
        params.set_flat(&flat)?;
    }
    let (params, best_val_loss, best_iteration) = best.expect("at least one iteration");
    Ok(MlpBaselineFit { params, config: *cfg, task, best_val_loss, best_iteration })
}
