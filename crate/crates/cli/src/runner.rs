use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nimo::baselines::{fit_mlp_baseline, fit_ridge, lasso_cd, logistic_newton, LassoOptions, LogisticOptions};
use nimo::data::{generate, load_csv, split, Dataset, GeneratorSpec, SplitLabel};
use nimo::mlp::{NetworkConfig, OutputRange};
use nimo::model::Task;
use nimo::numerics::{softplus, DenseMatrix, StandardizationStats};
use nimo::optimize::{
    grid_points, train_classification, train_regression, GridResult, PenaltyState, TraceRecord, TrainConfig, TrainData,
};
use nimo::NimoError;
use rayon::prelude::*;

use crate::config::{DatasetSpec, ExperimentConfig, Method};
use crate::error::{CliError, CliResult};
use crate::reference::{compare_to_reference, table_for};
use crate::report::{
    mean_std, report_sparsity, sparsity_records, support, DatasetInfo, MethodReport, Metric, MetricsReport,
    RepetitionReport, SCHEMA_VERSION,
};

/// Everything one `(method, repetition)` cell produced.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub method: Method,
    pub report: RepetitionReport,
    /// Dataset row index of each test prediction.
    pub rows: Vec<usize>,
    pub targets: Vec<f64>,
    pub predictions: Vec<f64>,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub cells: Vec<CellOutput>,
}

fn repetition_seed(cfg: &ExperimentConfig, rep: usize) -> u64 {
    cfg.seed.wrapping_add(rep as u64)
}

fn split_counts(n: usize, fractions: [f64; 2]) -> (usize, usize, usize) {
    let tr = (fractions[0] * n as f64).floor() as usize;
    let va = (fractions[1] * n as f64).floor() as usize;
    (tr, va, n - tr - va)
}

/// Loads the CSV once (if any), then builds one split dataset per repetition.
fn prepare_datasets(cfg: &ExperimentConfig) -> CliResult<Vec<Dataset>> {
    let base = match &cfg.dataset {
        DatasetSpec::Csv { path, target, task, .. } => Some(load_csv(path, target, *task).map_err(CliError::Data)?),
        DatasetSpec::Synthetic { .. } => None,
    };
    (0..cfg.repeats)
        .into_par_iter()
        .map(|rep| {
            let seed = repetition_seed(cfg, rep);
            let ds = match (&cfg.dataset, &base) {
                (DatasetSpec::Synthetic { setting, counts, noise_sd }, _) => {
                    let spec = GeneratorSpec {
                        setting: *setting,
                        n: counts.iter().sum(),
                        noise_sd: *noise_sd,
                        seed,
                    };
                    generate(&spec).and_then(|ds| split(&ds, (counts[0], counts[1], counts[2]), seed))
                }
                (DatasetSpec::Csv { fractions, .. }, Some(ds)) => split(ds, split_counts(ds.n(), *fractions), seed),
                (DatasetSpec::Csv { .. }, None) => unreachable!("CSV loaded above"),
            };
            ds.map_err(CliError::Data)
        })
        .collect()
}

struct Fitted {
    selected: BTreeMap<String, f64>,
    val_loss: f64,
    intercept: Option<f64>,
    coefficients: Option<Vec<f64>>,
    norms: Option<Vec<f64>>,
    test_predictions: Vec<f64>,
    iterations: Option<usize>,
    trace: Vec<TraceRecord>,
}

fn val_loss(task: Task, eta: &[f64], y: &[f64]) -> f64 {
    let s: f64 = match task {
        Task::Regression => eta.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum(),
        Task::Logistic => eta.iter().zip(y).map(|(&e, &t)| softplus(e) - t * e).sum(),
    };
    s / y.len().max(1) as f64
}

/// Coefficients and intercept mapped back to raw feature units.
fn raw_linear(stats: &StandardizationStats, intercept: f64, beta: &[f64]) -> (f64, Vec<f64>) {
    let raw: Vec<f64> = beta.iter().zip(&stats.stddevs).map(|(b, s)| b / s).collect();
    let shift: f64 = raw.iter().zip(&stats.means).map(|(b, m)| b * m).sum();
    (intercept - shift, raw)
}

struct Linear {
    intercept: f64,
    beta: Vec<f64>,
}

impl Linear {
    fn eta(&self, x: &DenseMatrix) -> nimo::Result<Vec<f64>> {
        Ok(x.mul_vec(&self.beta)?.into_iter().map(|v| v + self.intercept).collect())
    }
}

/// Fits every grid value and keeps the lowest validation loss (earliest on ties).
fn fit_linear(
    method: Method,
    grid: &[f64],
    data: &TrainData,
    test_x: &DenseMatrix,
    task: Task,
) -> nimo::Result<Fitted> {
    let n = data.x_train.rows() as f64;
    let fits = grid
        .par_iter()
        .map(|&alpha| {
            let (x, y) = (&data.x_train, &data.y_train);
            let fit = match method {
                Method::Lasso => {
                    let opts = LassoOptions { fit_intercept: true, ..Default::default() };
                    let f = lasso_cd(x, y, n * alpha, opts)?;
                    Linear { intercept: f.intercept, beta: f.coefficients }
                }
                Method::Ridge => {
                    let f = fit_ridge(x, y, n * alpha)?;
                    Linear { intercept: f.intercept, beta: f.coefficients }
                }
                Method::Logistic => {
                    let f = logistic_newton(x, y, n * alpha, 0.0, LogisticOptions::default())?;
                    Linear { intercept: f.intercept, beta: f.coefficients }
                }
                Method::Nimo | Method::Mlp => unreachable!("not a linear baseline"),
            };
            let loss = val_loss(task, &fit.eta(&data.x_val)?, &data.y_val);
            Ok((alpha, fit, loss))
        })
        .collect::<nimo::Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, f) in fits.iter().enumerate() {
        if f.2 < fits[best].2 {
            best = k;
        }
    }
    let (alpha, fit, loss) = &fits[best];
    let eta = fit.eta(test_x)?;
    let test_predictions = match task {
        Task::Regression => eta,
        Task::Logistic => eta.into_iter().map(nimo::numerics::sigmoid).collect(),
    };
    let (intercept, beta) = raw_linear(&data.stats, fit.intercept, &fit.beta);
    Ok(Fitted {
        selected: BTreeMap::from([("alpha".to_string(), *alpha)]),
        val_loss: *loss,
        intercept: Some(intercept),
        coefficients: Some(beta),
        norms: None,
        test_predictions,
        iterations: None,
        trace: Vec::new(),
    })
}

fn fit_nimo(cfg: &ExperimentConfig, seed: u64, data: &TrainData, test_x_raw: &DenseMatrix, task: Task) -> nimo::Result<Fitted> {
    let s = &cfg.nimo;
    let d = data.x_train.cols();
    let range = match task {
        Task::Regression => OutputRange::Regression,
        Task::Logistic => OutputRange::Classification,
    };
    let net = NetworkConfig::new(d, s.hidden1, s.hidden2, range).with_noise_scale(s.noise_scale);
    let tc = TrainConfig { seed, trace_path: None, ..s.train.clone() };
    let points = grid_points(&s.lambda_grid, &s.mu_grid)?;
    let outcomes = points
        .par_iter()
        .map(|p| {
            let penalty = PenaltyState::new(d, p.lambda, p.mu, s.delta, s.lambda_group);
            match task {
                Task::Regression => train_regression(data, &net, &tc, penalty),
                Task::Logistic => train_classification(data, &net, &tc, penalty),
            }
        })
        .collect::<nimo::Result<Vec<_>>>()?;
    let grid = GridResult::from_outcomes(points, outcomes)?;
    let point = grid.best_point();
    let best = grid.best_outcome();
    let model = &best.model;
    let norms = report_sparsity(model, &[]).into_iter().map(|r| r.group_norm.unwrap_or(0.0)).collect();
    let (intercept, _) = raw_linear(&model.stats, model.intercept, &model.coefficients);
    Ok(Fitted {
        selected: BTreeMap::from([("lambda".to_string(), point.lambda), ("mu".to_string(), point.mu)]),
        val_loss: best.best_val_loss,
        intercept: Some(intercept),
        coefficients: Some(model.raw_coefficients()),
        norms: Some(norms),
        test_predictions: model.predict(test_x_raw)?,
        iterations: Some(best.iterations),
        trace: best.trace.clone(),
    })
}

fn fit_mlp(cfg: &ExperimentConfig, seed: u64, data: &TrainData, test_x: &DenseMatrix, task: Task) -> nimo::Result<Fitted> {
    let tc = TrainConfig { seed, trace_path: None, ..cfg.mlp.train.clone() };
    let fit = fit_mlp_baseline(data, &cfg.mlp.network(), &tc, task)?;
    Ok(Fitted {
        selected: BTreeMap::from([("dropout".to_string(), cfg.mlp.dropout)]),
        val_loss: fit.best_val_loss,
        intercept: None,
        coefficients: None,
        norms: None,
        test_predictions: fit.predict(test_x)?,
        iterations: Some(fit.best_iteration),
        trace: Vec::new(),
    })
}

fn run_cell(cfg: &ExperimentConfig, method: Method, rep: usize, ds: &Dataset) -> nimo::Result<CellOutput> {
    let seed = repetition_seed(cfg, rep);
    let task = ds.task;
    let data = ds.train_data()?;
    let test = ds.partition(SplitLabel::Test)?;
    if data.y_val.is_empty() {
        return Err(NimoError::InsufficientRows { needed: 1, available: 0 });
    }
    let fitted = match method {
        Method::Nimo => fit_nimo(cfg, seed, &data, &test.x_raw, task)?,
        Method::Mlp => fit_mlp(cfg, seed, &data, &test.x_std, task)?,
        Method::Lasso => fit_linear(method, &cfg.lasso.grid, &data, &test.x_std, task)?,
        Method::Ridge => fit_linear(method, &cfg.ridge.grid, &data, &test.x_std, task)?,
        Method::Logistic => fit_linear(method, &cfg.logistic.grid, &data, &test.x_std, task)?,
    };
    if fitted.test_predictions.iter().any(|p| !p.is_finite()) {
        return Err(NimoError::NonFinite("test predictions"));
    }
    let features = match &fitted.coefficients {
        Some(beta) => sparsity_records(beta, fitted.norms.as_deref(), &ds.feature_names),
        None => Vec::new(),
    };
    let metric = Metric::for_task(task);
    let report = RepetitionReport {
        repetition: rep,
        seed,
        selected: fitted.selected,
        val_loss: fitted.val_loss,
        test_metric: metric.evaluate(&fitted.test_predictions, &test.y),
        intercept: fitted.intercept,
        support: support(&features),
        features,
        iterations: fitted.iterations,
    };
    Ok(CellOutput {
        method,
        report,
        rows: test.rows,
        targets: test.y,
        predictions: fitted.test_predictions,
        trace: fitted.trace,
    })
}

fn dataset_info(cfg: &ExperimentConfig, ds: &Dataset) -> DatasetInfo {
    let name = match &cfg.dataset {
        DatasetSpec::Synthetic { setting, .. } => setting.name().to_string(),
        DatasetSpec::Csv { path, .. } => path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned()),
    };
    DatasetInfo {
        name,
        setting: ds.setting,
        task: ds.task,
        features: ds.feature_names.clone(),
        ground_truth: ds.ground_truth.clone(),
    }
}

/// Runs every method for every repetition and assembles the report. Writes the
/// output files when `output_dir` is set.
pub fn run(config: &ExperimentConfig) -> CliResult<RunOutput> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (datasets, cells) = pool.install(|| -> CliResult<_> {
        let datasets = prepare_datasets(config)?;
        let jobs: Vec<(Method, usize)> =
            config.methods.iter().flat_map(|&m| (0..config.repeats).map(move |r| (m, r))).collect();
        let cells = jobs
            .par_iter()
            .map(|&(method, rep)| {
                run_cell(config, method, rep, &datasets[rep]).map_err(|source| CliError::Method {
                    method,
                    repetition: rep,
                    source,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok((datasets, cells))
    })?;

    let metric = Metric::for_task(config.task());
    let mut methods = BTreeMap::new();
    for &m in &config.methods {
        let reps: Vec<RepetitionReport> = cells.iter().filter(|c| c.method == m).map(|c| c.report.clone()).collect();
        let values: Vec<f64> = reps.iter().map(|r| r.test_metric).collect();
        let (mean, stddev) = mean_std(&values);
        methods.insert(
            m.name().to_string(),
            MethodReport { metric, mean, stddev, values, repetitions: reps, reference: None },
        );
    }
    let echo = ExperimentConfig { output_dir: None, workers: None, ..config.clone() };
    let report = MetricsReport {
        schema_version: SCHEMA_VERSION,
        config: echo,
        dataset: dataset_info(config, &datasets[0]),
        methods,
    };
    let report = match compare_to_reference(&report, table_for(&report)) {
        Ok(annotated) => annotated,
        Err(CliError::UnknownTableRow { .. }) => report,
        Err(e) => return Err(e),
    };
    let out = RunOutput { report, cells };
    if let Some(dir) = &config.output_dir {
        write_outputs(&out, dir)?;
    }
    Ok(out)
}

fn csv_writer(dir: &Path, name: &str, header: &[&str]) -> CliResult<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    Ok(w)
}

/// `report.json` plus CSV tables of metrics, coefficients, norms, traces and
/// test predictions.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    fs::write(dir.join("report.json"), out.report.to_json()?)?;

    let mut w = csv_writer(dir, "metrics.csv", &["method", "metric", "mean", "stddev", "repeats"])?;
    for (name, m) in &out.report.methods {
        let row = [name.clone(), m.metric.name().into(), m.mean.to_string(), m.stddev.to_string(), m.values.len().to_string()];
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut coef = csv_writer(dir, "coefficients.csv", &["method", "repetition", "feature", "coefficient", "zero"])?;
    let mut norms = csv_writer(dir, "norms.csv", &["method", "repetition", "feature", "group_norm"])?;
    let mut trace = csv_writer(dir, "traces.csv", &["method", "repetition", "iteration", "train_loss", "val_loss", "nonzero"])?;
    let mut preds = csv_writer(dir, "predictions.csv", &["method", "repetition", "row", "target", "prediction"])?;
    for c in &out.cells {
        let (m, r) = (c.method.name().to_string(), c.report.repetition.to_string());
        for f in &c.report.features {
            coef.write_record([&m, &r, &f.feature, &f.coefficient.to_string(), &f.zero.to_string()])?;
            if let Some(g) = f.group_norm {
                norms.write_record([&m, &r, &f.feature, &g.to_string()])?;
            }
        }
        for t in &c.trace {
            let row = [
                m.clone(),
                r.clone(),
                t.iteration.to_string(),
                t.train_loss.to_string(),
                t.val_loss.to_string(),
                t.nonzero.to_string(),
            ];
            trace.write_record(&row)?;
        }
        for ((row, y), p) in c.rows.iter().zip(&c.targets).zip(&c.predictions) {
            preds.write_record([&m, &r, &row.to_string(), &y.to_string(), &p.to_string()])?;
        }
    }
    for w in [&mut coef, &mut norms, &mut trace, &mut preds] {
        w.flush()?;
    }
    Ok(())
}

/// Recomputes each method's per-repetition metrics from a `predictions.csv` dump.
pub fn metrics_from_predictions(path: &Path, metric: Metric) -> CliResult<BTreeMap<String, Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut groups: BTreeMap<(String, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |k: usize| -> CliResult<f64> { rec[k].parse().map_err(|_| CliError::Io(format!("bad number `{}`", &rec[k]))) };
        let rep: usize = rec[1].parse().map_err(|_| CliError::Io("bad repetition".into()))?;
        let entry = groups.entry((rec[0].to_string(), rep)).or_default();
        entry.0.push(num(3)?);
        entry.1.push(num(4)?);
    }
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((method, _), (y, p)) in groups {
        out.entry(method).or_default().push(metric.evaluate(&p, &y));
    }
    Ok(out)
}
