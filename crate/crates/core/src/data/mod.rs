//! Synthetic generators, train/validation/test splitting and CSV ingestion.

mod settings;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NimoError, Result};
use crate::model::Task;
use crate::numerics::{sigmoid, DenseMatrix, SeededRng, StandardizationStats};
use crate::optimize::TrainData;

pub use settings::{GroundTruth, Setting, ALL_SETTINGS};

const STREAM_FEATURES: u64 = 101;
const STREAM_NOISE: u64 = 102;
const STREAM_LABELS: u64 = 103;
const STREAM_SPLIT: u64 = 104;

/// Default sizes used by the synthetic experiments.
pub const DEFAULT_COUNTS: (usize, usize, usize) = (200, 100, 100);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub setting: Setting,
    pub n: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(setting: Setting, n: usize, seed: u64) -> Self {
        Self { setting, n, noise_sd: 0.1, seed }
    }

    pub fn d(&self) -> usize {
        self.setting.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Train,
    Val,
    Test,
    Unused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x_raw: DenseMatrix,
    /// `x_raw` mapped through `stats`.
    pub x_std: DenseMatrix,
    pub y: Vec<f64>,
    pub task: Task,
    pub split: Vec<SplitLabel>,
    /// Moments of the feature law for synthetic settings, otherwise fitted
    /// on the training rows only.
    pub stats: StandardizationStats,
    pub feature_names: Vec<String>,
    pub setting: Option<Setting>,
    pub ground_truth: Option<GroundTruth>,
}

/// Rows of one split partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub x_raw: DenseMatrix,
    pub x_std: DenseMatrix,
    pub y: Vec<f64>,
    pub rows: Vec<usize>,
}

fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x_raw.cols()
    }

    pub fn count(&self, label: SplitLabel) -> usize {
        self.split.iter().filter(|&&l| l == label).count()
    }

    pub fn partition(&self, label: SplitLabel) -> Result<Partition> {
        let rows: Vec<usize> = (0..self.n()).filter(|&i| self.split[i] == label).collect();
        Ok(Partition {
            x_raw: self.x_raw.select_rows(&rows),
            x_std: self.x_std.select_rows(&rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            rows,
        })
    }

    pub fn train_data(&self) -> Result<TrainData> {
        let tr = self.partition(SplitLabel::Train)?;
        let va = self.partition(SplitLabel::Val)?;
        Ok(TrainData {
            x_train: tr.x_std,
            y_train: tr.y,
            x_val: va.x_std,
            y_val: va.y,
            stats: self.stats.clone(),
        })
    }

    /// Builds a dataset with every row in the training split.
    fn all_train(
        x_raw: DenseMatrix,
        y: Vec<f64>,
        task: Task,
        feature_names: Vec<String>,
        setting: Option<Setting>,
    ) -> Result<Self> {
        let stats = fit_stats(setting, &x_raw)?;
        let x_std = stats.apply(&x_raw)?;
        let split = vec![SplitLabel::Train; y.len()];
        Ok(Self {
            x_raw,
            x_std,
            y,
            task,
            split,
            stats,
            feature_names,
            ground_truth: setting.map(Setting::ground_truth),
            setting,
        })
    }
}

/// Synthetic features are standardized with the `U(−2, 2)` moments, so the
/// standardized origin is the raw origin where ground-truth coefficients are
/// defined. Other data uses the given rows.
fn fit_stats(setting: Option<Setting>, x_train: &DenseMatrix) -> Result<StandardizationStats> {
    match setting {
        Some(s) => Ok(StandardizationStats { means: vec![0.0; s.dim()], stddevs: vec![4.0 / 12f64.sqrt(); s.dim()] }),
        None => StandardizationStats::fit(x_train),
    }
}

/// Draws `X ~ U(−2, 2)`, evaluates the setting's formula and adds
/// `N(0, σ²)` noise; classification settings then sample `Bernoulli(σ(y))`.
/// All rows start in the training split.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
        return Err(NimoError::InvalidArgument("noise sd must be non-negative".into()));
    }
    let d = spec.d();
    let mut fx = SeededRng::new(spec.seed, STREAM_FEATURES);
    let mut fe = SeededRng::new(spec.seed, STREAM_NOISE);
    let mut fl = SeededRng::new(spec.seed, STREAM_LABELS);
    let x = DenseMatrix::from_fn(spec.n, d, |_, _| fx.uniform_range(-2.0, 2.0));
    let mut y = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let latent = spec.setting.latent(x.row(i)) + spec.noise_sd * fe.normal();
        y.push(match spec.setting.task() {
            Task::Regression => latent,
            Task::Logistic => f64::from(u8::from(fl.bernoulli(sigmoid(latent)))),
        });
    }
    Dataset::all_train(x, y, spec.setting.task(), default_names(d), Some(spec.setting))
}

/// Random disjoint assignment of `(train, val, test)` rows; remaining rows are
/// marked unused. Non-synthetic data is restandardized on the training rows.
pub fn split(dataset: &Dataset, counts: (usize, usize, usize), seed: u64) -> Result<Dataset> {
    let (tr, va, te) = counts;
    let needed = tr + va + te;
    if needed > dataset.n() {
        return Err(NimoError::InsufficientRows { needed, available: dataset.n() });
    }
    let mut order: Vec<usize> = (0..dataset.n()).collect();
    SeededRng::new(seed, STREAM_SPLIT).shuffle(&mut order);
    let mut labels = vec![SplitLabel::Unused; dataset.n()];
    for (k, &i) in order.iter().enumerate() {
        labels[i] = match k {
            k if k < tr => SplitLabel::Train,
            k if k < tr + va => SplitLabel::Val,
            k if k < needed => SplitLabel::Test,
            _ => SplitLabel::Unused,
        };
    }
    let train_rows: Vec<usize> = (0..dataset.n()).filter(|&i| labels[i] == SplitLabel::Train).collect();
    let stats = fit_stats(dataset.setting, &dataset.x_raw.select_rows(&train_rows))?;
    let x_std = stats.apply(&dataset.x_raw)?;
    Ok(Dataset { x_std, stats, split: labels, ..dataset.clone() })
}

/// Generates `train + val + test` rows and splits them.
pub fn generate_split(setting: Setting, counts: (usize, usize, usize), seed: u64) -> Result<Dataset> {
    let n = counts.0 + counts.1 + counts.2;
    split(&generate(&GeneratorSpec::new(setting, n, seed))?, counts, seed)
}

/// Reads a numeric CSV with a header row. Every column other than `target`
/// becomes a feature. Parse errors report the 1-based file line and column.
pub fn load_csv(path: &Path, target: &str, task: Task) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let t = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| NimoError::MissingColumn(target.to_string()))?;
    let names: Vec<String> = headers.iter().enumerate().filter(|&(j, _)| j != t).map(|(_, h)| h.clone()).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        let mut feats = Vec::with_capacity(names.len());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or(NimoError::Parse { row: line, col: j + 1 })?;
            if j == t {
                y.push(v);
            } else {
                feats.push(v);
            }
        }
        rows.push(feats);
    }
    if rows.is_empty() {
        return Err(NimoError::InsufficientRows { needed: 1, available: 0 });
    }
    let x = DenseMatrix::from_rows(&rows)?;
    Dataset::all_train(x, y, task, names, None)
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheManifest {
    format: u32,
    task: Task,
    feature_names: Vec<String>,
    setting: Option<Setting>,
    ground_truth: Option<GroundTruth>,
    split: Vec<SplitLabel>,
    stats: StandardizationStats,
    payload: String,
}

const CACHE_FORMAT: u32 = 1;
const CACHE_TARGET: &str = "__target__";

/// Writes `manifest.json` and `data.csv` (raw features plus target) to `dir`.
pub fn save_cache(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("data.csv"))?;
    let mut header = dataset.feature_names.clone();
    header.push(CACHE_TARGET.to_string());
    w.write_record(&header)?;
    for i in 0..dataset.n() {
        let mut rec: Vec<String> = dataset.x_raw.row(i).iter().map(f64::to_string).collect();
        rec.push(dataset.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    let manifest = CacheManifest {
        format: CACHE_FORMAT,
        task: dataset.task,
        feature_names: dataset.feature_names.clone(),
        setting: dataset.setting,
        ground_truth: dataset.ground_truth.clone(),
        split: dataset.split.clone(),
        stats: dataset.stats.clone(),
        payload: "data.csv".into(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_cache(dir: &Path) -> Result<Dataset> {
    let manifest: CacheManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.format != CACHE_FORMAT {
        return Err(NimoError::InvalidArgument(format!("unsupported cache format {}", manifest.format)));
    }
    let raw = load_csv(&dir.join(&manifest.payload), CACHE_TARGET, manifest.task)?;
    if raw.n() != manifest.split.len() {
        return Err(crate::error::dims(manifest.split.len(), raw.n()));
    }
    let x_std = manifest.stats.apply(&raw.x_raw)?;
    Ok(Dataset {
        x_raw: raw.x_raw,
        x_std,
        y: raw.y,
        task: manifest.task,
        split: manifest.split,
        stats: manifest.stats,
        feature_names: manifest.feature_names,
        setting: manifest.setting,
        ground_truth: manifest.ground_truth,
    })
}
