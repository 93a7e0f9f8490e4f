//! The shared correction network.
//!
//! One three-layer network serves every feature position. For query `(x, j)`
//! the input is `x` with entry `j` zeroed, followed by the binary encoding of
//! `j`. Layer one is followed by (optional, train-only) Gaussian noise and
//! `tanh`, layer two by `sin`, and the scalar output by a range squash. The
//! value at the zero input is subtracted so that every correction vanishes at
//! the baseline.

mod forward;
mod penalty;

use serde::{Deserialize, Serialize};

use crate::error::{dims, NimoError, Result};
use crate::numerics::{DenseMatrix, SeededRng};

pub use forward::{backward, forward_matrix, forward_one, forward_values, ForwardCache, QueryTrace};
pub use penalty::{first_layer_norms, group_penalty};

/// Noise multiplier applied to standard normal draws in train mode.
pub const DEFAULT_NOISE_SCALE: f64 = 0.2;

/// Range of the squashed network output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRange {
    /// `tanh`, range `[-1, 1]`.
    Regression,
    /// `1 + 2 tanh`, range `[-1, 3]`.
    Classification,
}

/// Nonlinearities used by the network. `Linear` replaces every activation and
/// the squash by the identity; it exists for checking gradients by hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Standard,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub enc_bits: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub noise_scale: f64,
    pub output_range: OutputRange,
    pub train_mode: bool,
    #[serde(default)]
    pub activation: Activation,
}

impl NetworkConfig {
    pub fn new(input_dim: usize, hidden1: usize, hidden2: usize, output_range: OutputRange) -> Self {
        Self {
            input_dim,
            enc_bits: enc_bits(input_dim),
            hidden1,
            hidden2,
            noise_scale: DEFAULT_NOISE_SCALE,
            output_range,
            train_mode: false,
            activation: Activation::Standard,
        }
    }

    pub fn with_train_mode(&self, train: bool) -> Self {
        Self {
            train_mode: train,
            ..self.clone()
        }
    }

    pub fn with_noise_scale(&self, noise_scale: f64) -> Self {
        Self {
            noise_scale,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(NimoError::InvalidArgument(
                "network dimensions must be at least 1".into(),
            ));
        }
        if self.enc_bits != enc_bits(self.input_dim) {
            return Err(dims(enc_bits(self.input_dim), self.enc_bits));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(NimoError::InvalidArgument(format!(
                "noise scale must be non-negative, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }

    /// Width of the first layer's input: features plus encoding bits.
    pub fn input_width(&self) -> usize {
        self.input_dim + self.enc_bits
    }

    /// True when noise is actually injected.
    pub fn noisy(&self) -> bool {
        self.train_mode && self.noise_scale > 0.0
    }
}

/// Weights and biases of the three layers. `w1` is `hidden1 × (d + enc_bits)`,
/// `w2` is `hidden2 × hidden1`, `w3` maps `hidden2` to the scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

/// Gradients share the parameter layout.
pub type NetworkGradients = NetworkParams;

impl NetworkParams {
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        Self::zeros_with_input(cfg.input_width(), cfg.hidden1, cfg.hidden2)
    }

    pub(crate) fn zeros_with_input(input: usize, hidden1: usize, hidden2: usize) -> Self {
        Self {
            w1: DenseMatrix::zeros(hidden1, input),
            b1: vec![0.0; hidden1],
            w2: DenseMatrix::zeros(hidden2, hidden1),
            b2: vec![0.0; hidden2],
            w3: vec![0.0; hidden2],
            b3: 0.0,
        }
    }

    /// Uniform `±1/√fan_in` weights, zero biases.
    pub fn init(cfg: &NetworkConfig, rng: &mut SeededRng) -> Self {
        Self::init_with_input(cfg.input_width(), cfg.hidden1, cfg.hidden2, rng)
    }

    pub(crate) fn init_with_input(
        input: usize,
        hidden1: usize,
        hidden2: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let mut p = Self::zeros_with_input(input, hidden1, hidden2);
        let fill = |m: &mut [f64], fan_in: usize, rng: &mut SeededRng| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            m.iter_mut().for_each(|v| *v = rng.uniform_range(-bound, bound));
        };
        fill(p.w1.as_mut_slice(), input, rng);
        fill(p.w2.as_mut_slice(), hidden1, rng);
        fill(&mut p.w3, hidden2, rng);
        p
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        let expected = Self::zeros(cfg);
        if self.w1.shape() != expected.w1.shape()
            || self.b1.len() != expected.b1.len()
            || self.w2.shape() != expected.w2.shape()
            || self.b2.len() != expected.b2.len()
            || self.w3.len() != expected.w3.len()
        {
            return Err(dims(
                format!("parameters for {cfg:?}"),
                format!(
                    "w1 {:?}, w2 {:?}, w3 {}",
                    self.w1.shape(),
                    self.w2.shape(),
                    self.w3.len()
                ),
            ));
        }
        if !self.is_finite() {
            return Err(NimoError::NonFinite("network parameters"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.segments().iter().all(|s| s.iter().all(|v| v.is_finite())) && self.b3.is_finite()
    }

    pub fn num_params(&self) -> usize {
        self.segments().iter().map(|s| s.len()).sum::<usize>() + 1
    }

    fn segments(&self) -> [&[f64]; 5] {
        [
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
            &self.w3,
        ]
    }

    /// All parameters in a fixed order: w1, b1, w2, b2, w3, b3.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for s in self.segments() {
            out.extend_from_slice(s);
        }
        out.push(self.b3);
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(dims(self.num_params(), flat.len()));
        }
        let mut at = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[at..at + dst.len()]);
            at += dst.len();
        };
        take(self.w1.as_mut_slice());
        take(&mut self.b1);
        take(self.w2.as_mut_slice());
        take(&mut self.b2);
        take(&mut self.w3);
        self.b3 = flat[flat.len() - 1];
        Ok(())
    }

    /// `self += scale * other`, element-wise.
    pub fn add_scaled(&mut self, other: &NetworkParams, scale: f64) {
        let add = |a: &mut [f64], b: &[f64]| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        };
        add(self.w1.as_mut_slice(), other.w1.as_slice());
        add(&mut self.b1, &other.b1);
        add(self.w2.as_mut_slice(), other.w2.as_slice());
        add(&mut self.b2, &other.b2);
        add(&mut self.w3, &other.w3);
        self.b3 += scale * other.b3;
    }
}

/// Number of encoding bits for `d` positions: `⌊log₂ d⌋ + 1`.
pub fn enc_bits(d: usize) -> usize {
    if d == 0 {
        0
    } else {
        (usize::BITS - d.leading_zeros()) as usize
    }
}

/// Big-endian binary expansion of `j` over `⌊log₂ d⌋ + 1` bits.
pub fn encode_position(j: usize, d: usize) -> Result<Vec<f64>> {
    if j >= d {
        return Err(NimoError::IndexOutOfRange { index: j, len: d });
    }
    let bits = enc_bits(d);
    Ok((0..bits)
        .map(|b| ((j >> (bits - 1 - b)) & 1) as f64)
        .collect())
}

/// Flat JSON document holding a network configuration and its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerializedNetwork {
    pub config: NetworkConfig,
    #[serde(flatten)]
    pub params: NetworkParams,
}

impl SerializedNetwork {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: SerializedNetwork = serde_json::from_str(s)?;
        net.config.validate()?;
        net.params.validate(&net.config)?;
        Ok(net)
    }
}
