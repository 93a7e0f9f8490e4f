use serde::{Deserialize, Serialize};

/// Lower bound enforced on every scale entry after a step.
pub const C_FLOOR: f64 = 1e-8;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    PlainGd,
    #[default]
    Adam,
}

/// Step counter and moment estimates for one parameter vector.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: Optimizer,
    pub learning_rate: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, learning_rate: f64, len: usize) -> Self {
        let moments = if kind == Optimizer::Adam { len } else { 0 };
        Self {
            kind,
            learning_rate,
            t: 0,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One update of `values` along `-grads`.
pub fn optimizer_step(values: &mut [f64], grads: &[f64], state: &mut OptimizerState) {
    assert_eq!(values.len(), grads.len(), "gradient length");
    state.t += 1;
    let lr = state.learning_rate;
    match state.kind {
        Optimizer::PlainGd => {
            for (v, g) in values.iter_mut().zip(grads) {
                *v -= lr * g;
            }
        }
        Optimizer::Adam => {
            assert_eq!(state.m.len(), values.len(), "optimizer state length");
            let t = state.t as i32;
            let c1 = 1.0 - BETA1.powi(t);
            let c2 = 1.0 - BETA2.powi(t);
            for k in 0..values.len() {
                let g = grads[k];
                state.m[k] = BETA1 * state.m[k] + (1.0 - BETA1) * g;
                state.v[k] = BETA2 * state.v[k] + (1.0 - BETA2) * g * g;
                let mh = state.m[k] / c1;
                let vh = state.v[k] / c2;
                values[k] -= lr * mh / (vh.sqrt() + EPS);
            }
        }
    }
}

pub fn project_positive(c: &mut [f64]) {
    for v in c {
        if !(*v >= C_FLOOR) {
            *v = C_FLOOR;
        }
    }
}
