use std::collections::BTreeMap;
use std::fs;
use std::process::Command;

use nimo::data::Setting;
use nimo::optimize::TrainConfig;
use nimo_cli::config::{LinearSettings, MlpSettings, NimoSettings};
use nimo_cli::runner::metrics_from_predictions;
use nimo_cli::{compare_to_reference, run, CliError, DatasetSpec, ExperimentConfig, Method, Metric};

fn quick_config(setting: Setting, methods: Vec<Method>) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Synthetic { setting, counts: [60, 30, 30], noise_sd: 0.1 },
        methods,
        seed: 7,
        repeats: 2,
        workers: Some(2),
        output_dir: None,
        nimo: NimoSettings {
            lambda_grid: vec![0.01, 0.1],
            mu_grid: vec![0.01],
            hidden1: 8,
            hidden2: 8,
            train: TrainConfig { max_iters: 40, learning_rate: 1e-2, ..Default::default() },
            ..Default::default()
        },
        lasso: LinearSettings { grid: vec![1e-3, 1e-2, 1e-1] },
        ridge: LinearSettings { grid: vec![1e-3, 1e-1] },
        logistic: LinearSettings { grid: vec![1e-3, 1e-1] },
        mlp: MlpSettings { hidden1: 8, hidden2: 4, train: TrainConfig { max_iters: 40, ..Default::default() }, ..Default::default() },
    }
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_config(Setting::Reg1, vec![Method::Nimo, Method::Lasso, Method::Ridge, Method::Mlp]);
    cfg.output_dir = Some(dir.path().join("a"));
    run(&cfg).unwrap();
    cfg.output_dir = Some(dir.path().join("b"));
    cfg.workers = Some(1);
    run(&cfg).unwrap();
    for f in ["report.json", "metrics.csv", "coefficients.csv", "norms.csv", "traces.csv", "predictions.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn metrics_reconstruct_from_prediction_dump() {
    for (setting, methods, metric) in [
        (Setting::Reg1, vec![Method::Nimo, Method::Lasso, Method::Mlp], Metric::Mse),
        (Setting::Cls1, vec![Method::Nimo, Method::Logistic], Metric::Accuracy),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_config(setting, methods);
        cfg.output_dir = Some(dir.path().to_path_buf());
        let out = run(&cfg).unwrap();
        let recomputed = metrics_from_predictions(&dir.path().join("predictions.csv"), metric).unwrap();
        for (name, m) in &out.report.methods {
            let values = &recomputed[name];
            assert_eq!(values.len(), m.values.len());
            for (a, b) in values.iter().zip(&m.values) {
                assert!((a - b).abs() <= 1e-12);
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            assert!((mean - m.mean).abs() <= 1e-12);
            assert!(m.stddev >= 0.0);
        }
        let on_disk: nimo_cli::MetricsReport =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(on_disk, out.report);
    }
}

#[test]
fn report_contents() {
    let out = run(&quick_config(Setting::RegToy, vec![Method::Nimo, Method::Lasso])).unwrap();
    let r = &out.report;
    assert_eq!(r.schema_version, 1);
    assert_eq!(r.dataset.features, vec!["x1", "x2", "x3"]);
    let nimo = r.method("nimo").unwrap();
    assert_eq!(nimo.repetitions.len(), 2);
    for rep in &nimo.repetitions {
        assert_eq!(rep.features.len(), 3);
        assert!(rep.features.iter().all(|f| f.group_norm.is_some()));
        assert!(rep.support.iter().all(|s| r.dataset.features.contains(s)));
        assert!(rep.selected.contains_key("lambda") && rep.selected.contains_key("mu"));
    }
    assert_eq!(nimo.reference.as_ref().unwrap().value, 0.166);
    assert_eq!(r.method("lasso").unwrap().reference.as_ref().unwrap().value, 18.982);
}

#[test]
fn reference_annotations() {
    let out = run(&quick_config(Setting::Reg1, vec![Method::Lasso])).unwrap();
    let mut report = out.report.clone();
    report.methods.insert("nimo".into(), report.methods["lasso"].clone());
    let annotated = compare_to_reference(&report, "regression_mse").unwrap();
    let nimo = annotated.method("nimo").unwrap();
    assert_eq!(nimo.reference.as_ref().unwrap().value, 0.030);
    assert_eq!(nimo.reference.as_ref().unwrap().ratio, nimo.mean / 0.030);

    let out = run(&quick_config(Setting::Cls3, vec![Method::Logistic])).unwrap();
    let mut report = out.report.clone();
    report.methods.insert("nimo".into(), report.methods["logistic"].clone());
    let annotated = compare_to_reference(&report, "classification_accuracy").unwrap();
    assert_eq!(annotated.method("nimo").unwrap().reference.as_ref().unwrap().value, 0.84);
}

fn write_csv(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("data.csv");
    let mut body = String::from("a,b,target\n");
    for i in 0..40 {
        let (a, b) = (i as f64 * 0.1, ((i * 7) % 11) as f64);
        body.push_str(&format!("{a},{b},{}\n", 2.0 * a - 0.5 * b + 1.0));
    }
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn csv_datasets_have_no_reference_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_config(Setting::Reg1, vec![Method::Ridge]);
    cfg.dataset = DatasetSpec::Csv {
        path: write_csv(dir.path()),
        target: "target".into(),
        task: nimo::model::Task::Regression,
        fractions: [0.6, 0.2],
    };
    let out = run(&cfg).unwrap();
    assert_eq!(out.report.dataset.features, vec!["a", "b"]);
    assert!(out.report.method("ridge").unwrap().reference.is_none());
    assert!(matches!(
        compare_to_reference(&out.report, "regression_mse"),
        Err(CliError::UnknownTableRow { .. })
    ));
    let coef = &out.report.method("ridge").unwrap().repetitions[0].features;
    assert!((coef[0].coefficient - 2.0).abs() < 0.05 && (coef[1].coefficient + 0.5).abs() < 0.05);
}

#[test]
fn empty_method_list_is_a_config_error() {
    let cfg = quick_config(Setting::Reg1, vec![]);
    let err = run(&cfg).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert_eq!(err.exit_code(), 2);
}

fn nimo_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nimo"))
}

#[test]
fn binary_exit_codes_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_config(Setting::Reg1, vec![Method::Lasso]);
    cfg.repeats = 1;
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();

    let out_dir = dir.path().join("out");
    let status = nimo_bin()
        .args(["--config", cfg_path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", "3"])
        .args(["--setting", "reg_vanilla", "--method", "lasso,ridge", "--repeats", "2"])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 3);
    assert_eq!(report["dataset"]["name"], "reg_vanilla");
    let methods: BTreeMap<String, serde_json::Value> = serde_json::from_value(report["methods"].clone()).unwrap();
    assert_eq!(methods.keys().collect::<Vec<_>>(), vec!["lasso", "ridge"]);
    assert_eq!(methods["ridge"]["values"].as_array().unwrap().len(), 2);

    let code = |args: &[&str]| nimo_bin().args(args).output().unwrap().status.code();
    let out = out_dir.to_str().unwrap();
    assert_eq!(code(&["--config", cfg_path.to_str().unwrap(), "--method", "", "--out", out]), Some(2));
    assert_eq!(code(&["--setting", "reg9", "--out", out]), Some(2));
    assert_eq!(code(&["--config", "/nonexistent/cfg.json"]), Some(4));
    assert_eq!(code(&["--csv", "/nonexistent/data.csv", "--target-col", "y", "--method", "ridge", "--out", out]), Some(4));
    assert_eq!(code(&["--setting", "cls1", "--method", "lasso", "--out", out]), Some(2));
}
