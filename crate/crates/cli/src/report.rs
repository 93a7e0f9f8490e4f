use std::collections::BTreeMap;

use nimo::mlp::first_layer_norms;
use nimo::model::{FittedModel, Task};
use nimo::optimize::ZERO_THRESHOLD;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    Accuracy,
}

impl Metric {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => Metric::Mse,
            Task::Logistic => Metric::Accuracy,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Accuracy => "accuracy",
        }
    }

    /// Test MSE of predictions, or accuracy of probabilities thresholded at ½.
    pub fn evaluate(self, pred: &[f64], y: &[f64]) -> f64 {
        let n = y.len().max(1) as f64;
        match self {
            Metric::Mse => pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n,
            Metric::Accuracy => {
                pred.iter().zip(y).filter(|&(p, t)| f64::from(u8::from(*p >= 0.5)) == *t).count() as f64 / n
            }
        }
    }
}

/// One feature's coefficient and first-layer weight norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityRecord {
    pub feature: String,
    pub coefficient: f64,
    pub abs_coefficient: f64,
    pub zero: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_norm: Option<f64>,
}

/// Raw-scale `|β_j|`, the zero flag at [`ZERO_THRESHOLD`] and `‖w_j‖₂` per feature.
pub fn report_sparsity(model: &FittedModel, names: &[String]) -> Vec<SparsityRecord> {
    let norms = first_layer_norms(&model.params, &model.cfg);
    sparsity_records(&model.raw_coefficients(), Some(&norms), names)
}

pub(crate) fn sparsity_records(coefficients: &[f64], norms: Option<&[f64]>, names: &[String]) -> Vec<SparsityRecord> {
    coefficients
        .iter()
        .enumerate()
        .map(|(j, &b)| SparsityRecord {
            feature: names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1)),
            coefficient: b,
            abs_coefficient: b.abs(),
            zero: b.abs() < ZERO_THRESHOLD,
            group_norm: norms.map(|n| n[j]),
        })
        .collect()
}

pub fn support(records: &[SparsityRecord]) -> Vec<String> {
    records.iter().filter(|r| !r.zero).map(|r| r.feature.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub repetition: usize,
    pub seed: u64,
    /// Chosen hyperparameters by name.
    pub selected: BTreeMap<String, f64>,
    pub val_loss: f64,
    pub test_metric: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    pub features: Vec<SparsityRecord>,
    pub support: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAnnotation {
    pub table: String,
    pub value: f64,
    /// Our mean divided by the reference value.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub metric: Metric,
    pub mean: f64,
    pub stddev: f64,
    pub values: Vec<f64>,
    pub repetitions: Vec<RepetitionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    /// Setting name, or the CSV file name.
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setting: Option<nimo::data::Setting>,
    pub task: Task,
    pub features: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<nimo::data::GroundTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub dataset: DatasetInfo,
    pub methods: BTreeMap<String, MethodReport>,
}

impl MetricsReport {
    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn method(&self, name: &str) -> CliResult<&MethodReport> {
        self.methods.get(name).ok_or_else(|| CliError::Config(format!("no results for method {name}")))
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
