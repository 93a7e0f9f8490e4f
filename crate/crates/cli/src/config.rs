use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nimo::baselines::MlpConfig;
use nimo::data::{Setting, DEFAULT_COUNTS};
use nimo::model::Task;
use nimo::optimize::{default_lambda_grid, default_mu_grid, log_grid, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Nimo,
    Lasso,
    Logistic,
    Mlp,
    Ridge,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nimo => "nimo",
            Method::Lasso => "lasso",
            Method::Logistic => "logistic",
            Method::Mlp => "mlp",
            Method::Ridge => "ridge",
        }
    }

    pub fn supports(self, task: Task) -> bool {
        match self {
            Method::Nimo | Method::Mlp => true,
            Method::Lasso | Method::Ridge => task == Task::Regression,
            Method::Logistic => task == Task::Logistic,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nimo" => Ok(Method::Nimo),
            "lasso" => Ok(Method::Lasso),
            "logistic" => Ok(Method::Logistic),
            "mlp" | "nn" => Ok(Method::Mlp),
            "ridge" => Ok(Method::Ridge),
            other => Err(CliError::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic {
        setting: Setting,
        #[serde(default = "default_counts")]
        counts: [usize; 3],
        #[serde(default = "default_noise")]
        noise_sd: f64,
    },
    Csv {
        path: PathBuf,
        target: String,
        #[serde(default = "default_task")]
        task: Task,
        /// Train and validation fractions; the rest is test.
        #[serde(default = "default_fractions")]
        fractions: [f64; 2],
    },
}

fn default_counts() -> [usize; 3] {
    [DEFAULT_COUNTS.0, DEFAULT_COUNTS.1, DEFAULT_COUNTS.2]
}

fn default_noise() -> f64 {
    0.1
}

fn default_task() -> Task {
    Task::Regression
}

fn default_fractions() -> [f64; 2] {
    [0.6, 0.2]
}

impl DatasetSpec {
    pub fn synthetic(setting: Setting) -> Self {
        DatasetSpec::Synthetic { setting, counts: default_counts(), noise_sd: default_noise() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NimoSettings {
    pub lambda_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub delta: f64,
    pub lambda_group: f64,
    pub hidden1: usize,
    pub hidden2: usize,
    pub noise_scale: f64,
    pub train: TrainConfig,
}

impl Default for NimoSettings {
    fn default() -> Self {
        Self {
            lambda_grid: default_lambda_grid(),
            mu_grid: default_mu_grid(),
            delta: 1.0,
            lambda_group: 0.1,
            hidden1: 32,
            hidden2: 16,
            noise_scale: nimo::mlp::DEFAULT_NOISE_SCALE,
            train: TrainConfig::default(),
        }
    }
}

/// Penalty grid for a linear baseline, per training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearSettings {
    pub grid: Vec<f64>,
}

impl Default for LinearSettings {
    fn default() -> Self {
        Self { grid: log_grid(1e-4, 1.0, 9) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSettings {
    pub hidden1: usize,
    pub hidden2: usize,
    pub dropout: f64,
    pub train: TrainConfig,
}

impl Default for MlpSettings {
    fn default() -> Self {
        let net = MlpConfig::default();
        Self {
            hidden1: net.hidden1,
            hidden2: net.hidden2,
            dropout: net.dropout,
            train: TrainConfig { learning_rate: 1e-2, patience: Some(200), ..TrainConfig::default() },
        }
    }
}

impl MlpSettings {
    pub fn network(&self) -> MlpConfig {
        MlpConfig { hidden1: self.hidden1, hidden2: self.hidden2, dropout: self.dropout }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub repeats: usize,
    /// Thread count; `None` uses all cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub nimo: NimoSettings,
    pub lasso: LinearSettings,
    pub ridge: LinearSettings,
    pub logistic: LinearSettings,
    pub mlp: MlpSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::synthetic(Setting::RegToy),
            methods: vec![Method::Nimo, Method::Lasso],
            seed: 0,
            repeats: 5,
            workers: None,
            output_dir: None,
            nimo: NimoSettings::default(),
            lasso: LinearSettings::default(),
            ridge: LinearSettings::default(),
            logistic: LinearSettings::default(),
            mlp: MlpSettings::default(),
        }
    }
}

fn check_grid(name: &str, grid: &[f64], allow_zero: bool) -> CliResult<()> {
    if grid.is_empty() {
        return Err(CliError::Config(format!("{name} grid is empty")));
    }
    let ok = |v: &f64| v.is_finite() && (*v > 0.0 || (allow_zero && *v == 0.0));
    if !grid.iter().all(ok) {
        return Err(CliError::Config(format!("{name} grid has invalid values")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn task(&self) -> Task {
        match &self.dataset {
            DatasetSpec::Synthetic { setting, .. } => setting.task(),
            DatasetSpec::Csv { task, .. } => *task,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.methods.is_empty() {
            return Err(CliError::Config("method list is empty".into()));
        }
        if self.repeats == 0 {
            return Err(CliError::Config("repeats must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        let task = self.task();
        for m in &self.methods {
            if !m.supports(task) {
                return Err(CliError::Config(format!("method {m} does not apply to this task")));
            }
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(CliError::Config("method listed twice".into()));
        }
        match &self.dataset {
            DatasetSpec::Synthetic { counts, noise_sd, .. } => {
                if counts[0] < 2 || counts[2] == 0 {
                    return Err(CliError::Config("need at least 2 training rows and 1 test row".into()));
                }
                if !(*noise_sd >= 0.0 && noise_sd.is_finite()) {
                    return Err(CliError::Config("noise_sd must be non-negative".into()));
                }
            }
            DatasetSpec::Csv { fractions, .. } => {
                let [a, b] = *fractions;
                if !(a > 0.0 && b >= 0.0 && a + b < 1.0) {
                    return Err(CliError::Config("fractions must be positive and sum below 1".into()));
                }
            }
        }
        let n = &self.nimo;
        check_grid("nimo lambda", &n.lambda_grid, false)?;
        check_grid("nimo mu", &n.mu_grid, true)?;
        if !(n.delta > 0.0 && n.delta <= 1.0) || !(n.lambda_group >= 0.0) || !(n.noise_scale >= 0.0) {
            return Err(CliError::Config("nimo penalties out of range".into()));
        }
        if n.hidden1 == 0 || n.hidden2 == 0 || self.mlp.hidden1 == 0 || self.mlp.hidden2 == 0 {
            return Err(CliError::Config("hidden sizes must be at least 1".into()));
        }
        check_grid("lasso", &self.lasso.grid, true)?;
        check_grid("ridge", &self.ridge.grid, true)?;
        check_grid("logistic", &self.logistic.grid, true)?;
        if !(0.0..1.0).contains(&self.mlp.dropout) {
            return Err(CliError::Config("dropout must lie in [0, 1)".into()));
        }
        for tc in [&n.train, &self.mlp.train] {
            tc.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Command-line values that replace fields of the loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub methods: Option<Vec<Method>>,
    pub setting: Option<Setting>,
    pub csv: Option<PathBuf>,
    pub target_col: Option<String>,
    pub repeats: Option<usize>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn apply(self, cfg: &mut ExperimentConfig) -> CliResult<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = self.out {
            cfg.output_dir = Some(o);
        }
        if let Some(m) = self.methods {
            cfg.methods = m;
        }
        if let Some(r) = self.repeats {
            cfg.repeats = r;
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        match (self.setting, self.csv, self.target_col) {
            (Some(_), Some(_), _) => return Err(CliError::Config("--setting and --csv are exclusive".into())),
            (Some(setting), None, None) => {
                cfg.dataset = match cfg.dataset.clone() {
                    DatasetSpec::Synthetic { counts, noise_sd, .. } => DatasetSpec::Synthetic { setting, counts, noise_sd },
                    DatasetSpec::Csv { .. } => DatasetSpec::synthetic(setting),
                };
            }
            (Some(_), None, Some(_)) => return Err(CliError::Config("--target-col needs a CSV dataset".into())),
            (None, Some(path), target) => {
                let (task, fractions, old_target) = match &cfg.dataset {
                    DatasetSpec::Csv { task, fractions, target, .. } => (*task, *fractions, Some(target.clone())),
                    DatasetSpec::Synthetic { .. } => (default_task(), default_fractions(), None),
                };
                let target = target
                    .or(old_target)
                    .ok_or_else(|| CliError::Config("--csv needs --target-col".into()))?;
                cfg.dataset = DatasetSpec::Csv { path, target, task, fractions };
            }
            (None, None, Some(target)) => match &mut cfg.dataset {
                DatasetSpec::Csv { target: t, .. } => *t = target,
                DatasetSpec::Synthetic { .. } => {
                    return Err(CliError::Config("--target-col needs a CSV dataset".into()))
                }
            },
            (None, None, None) => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_methods_rejected() {
        let cfg = ExperimentConfig { methods: vec![], ..Default::default() };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn task_mismatch_rejected() {
        let cfg = ExperimentConfig { methods: vec![Method::Logistic], ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            dataset: DatasetSpec::synthetic(Setting::Cls1),
            methods: vec![Method::Logistic, Method::Nimo],
            ..Default::default()
        };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"dataset":{"synthetic":{"setting":"reg1"}},"methods":["lasso"]}"#).unwrap();
        assert_eq!(cfg.repeats, 5);
        assert_eq!(cfg.nimo.lambda_grid.len(), 7);
        assert!(matches!(cfg.dataset, DatasetSpec::Synthetic { counts: [200, 100, 100], .. }));
    }

    #[test]
    fn overrides_replace_fields() {
        let mut cfg = ExperimentConfig::default();
        Overrides {
            seed: Some(9),
            csv: Some("d.csv".into()),
            target_col: Some("y".into()),
            methods: Some(vec![Method::Ridge]),
            ..Default::default()
        }
        .apply(&mut cfg)
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.methods, vec![Method::Ridge]);
        assert!(matches!(&cfg.dataset, DatasetSpec::Csv { target, .. } if target == "y"));
        let err = Overrides { csv: Some("d.csv".into()), ..Default::default() }.apply(&mut ExperimentConfig::default());
        assert!(err.is_err());
    }
}
