//! End-to-end acceptance checks. Runs as a plain binary so the PASS/FAIL
//! lines are always printed; exits non-zero if any criterion fails.

use std::fs;
use std::time::Instant;

use nimo::baselines::{lasso_cd, logistic_newton, LassoOptions, LogisticOptions};
use nimo::data::Setting;
use nimo::mlp::{backward, forward_matrix, forward_one, forward_values, NetworkConfig, NetworkParams, OutputRange};
use nimo::model::{design_matrix, design_matrix_from, FittedModel, Task};
use nimo::numerics::{sigmoid, DenseMatrix, SeededRng, StandardizationStats};
use nimo::optimize::{
    fit_adaptive_ridge, profile_loss_regression, regression_objective, scale_penalty, train_classification_from,
    GradientMode, PenaltyState, TrainConfig, TrainData,
};
use nimo_cli::config::{LinearSettings, MlpSettings, NimoSettings};
use nimo_cli::{run, DatasetSpec, ExperimentConfig, Method, MetricsReport};

struct Check {
    id: usize,
    name: String,
    pass: bool,
    detail: String,
}

fn check(id: usize, name: impl Into<String>, pass: bool, detail: String) -> Check {
    let c = Check { id, name: name.into(), pass, detail };
    println!("{} [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
    c
}

fn normal_matrix(rng: &mut SeededRng, n: usize, d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |_, _| rng.normal())
}

fn uniform_matrix(rng: &mut SeededRng, n: usize, d: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |_, _| rng.uniform_range(-scale, scale))
}

fn random_params(cfg: &NetworkConfig, rng: &mut SeededRng, scale: f64) -> NetworkParams {
    let mut p = NetworkParams::zeros(cfg);
    let flat: Vec<f64> = (0..p.num_params()).map(|_| rng.uniform_range(-scale, scale)).collect();
    p.set_flat(&flat).unwrap();
    p
}

// ---------------------------------------------------------------------------
// Experiment configurations

struct NimoRun {
    lambdas: Vec<f64>,
    mus: Vec<f64>,
    lambda_group: f64,
    noise: f64,
    lr: f64,
    iters: usize,
}

const REGRESSION: NimoRun =
    NimoRun { lambdas: Vec::new(), mus: Vec::new(), lambda_group: 0.1, noise: 0.2, lr: 1e-2, iters: 3000 };

fn experiment(setting: Setting, methods: Vec<Method>, nimo: NimoRun) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSpec::Synthetic { setting, counts: [200, 100, 100], noise_sd: 0.1 },
        methods,
        seed: 1,
        repeats: 5,
        workers: None,
        output_dir: None,
        nimo: NimoSettings {
            lambda_grid: nimo.lambdas,
            mu_grid: nimo.mus,
            delta: 1.0,
            lambda_group: nimo.lambda_group,
            hidden1: 32,
            hidden2: 16,
            noise_scale: nimo.noise,
            train: TrainConfig { max_iters: nimo.iters, learning_rate: nimo.lr, patience: None, ..Default::default() },
        },
        lasso: LinearSettings::default(),
        ridge: LinearSettings::default(),
        logistic: LinearSettings::default(),
        mlp: MlpSettings::default(),
    }
}

fn run_experiment(cfg: &ExperimentConfig) -> MetricsReport {
    let t = Instant::now();
    let out = run(cfg).unwrap_or_else(|e| panic!("experiment failed: {e}"));
    let name = &out.report.dataset.name;
    for (m, r) in &out.report.methods {
        println!("  {name} {m}: mean {:.4} sd {:.4} values {:?}", r.mean, r.stddev, round(&r.values));
    }
    println!("  {name} finished in {:.1}s", t.elapsed().as_secs_f64());
    out.report
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

fn mean_of(report: &MetricsReport, method: &str) -> f64 {
    report.method(method).unwrap().mean
}

// ---------------------------------------------------------------------------
// Criteria 1, 2 (toy part) and 8 share the toy runs.

fn toy_criteria(out: &mut Vec<Check>) {
    let toy = NimoRun { lambdas: vec![0.01], mus: vec![1.0], noise: 0.1, ..REGRESSION };
    let report = run_experiment(&experiment(Setting::RegToy, vec![Method::Nimo, Method::Lasso], toy));
    let reps = &report.method("nimo").unwrap().repetitions;

    let mut recovered = 0;
    let mut sparse = 0;
    for rep in reps {
        let f = &rep.features;
        let ok = (f[0].coefficient - 3.0).abs() <= 0.3 && (f[1].coefficient + 3.0).abs() <= 0.3 && f[2].zero;
        recovered += usize::from(ok);
        let norms: Vec<f64> = f.iter().map(|r| r.group_norm.unwrap()).collect();
        let max = norms.iter().cloned().fold(0.0, f64::max);
        sparse += usize::from(norms[2] <= 0.1 * max);
        println!(
            "  toy rep {}: beta ({:.4}, {:.4}, {:.2e}) norms ({:.3}, {:.3}, {:.3})",
            rep.repetition, f[0].coefficient, f[1].coefficient, f[2].coefficient, norms[0], norms[1], norms[2]
        );
    }
    out.push(check(
        1,
        "toy coefficient recovery",
        recovered >= 4,
        format!("{recovered}/5 repetitions within 0.3 of (3, -3, 0) with beta3 zero"),
    ));

    let nimo = mean_of(&report, "nimo");
    let lasso = mean_of(&report, "lasso");
    out.push(check(2, "toy nimo mse", nimo <= 3.0 * 0.166, format!("{nimo:.4} <= {:.3}", 3.0 * 0.166)));
    out.push(check(
        2,
        "toy lasso mse",
        (0.7 * 18.982..=1.3 * 18.982).contains(&lasso),
        format!("{lasso:.3} in [{:.3}, {:.3}]", 0.7 * 18.982, 1.3 * 18.982),
    ));
    out.push(check(8, "toy first-layer sparsity", sparse >= 4, format!("{sparse}/5 repetitions with |w3| <= 0.1 max")));
}

fn regression_criteria(out: &mut Vec<Check>) {
    let pinned = || NimoRun { lambdas: vec![0.01], mus: vec![0.003], ..REGRESSION };
    for (setting, reference) in [(Setting::Reg1, 0.030), (Setting::Reg2, 0.217)] {
        let report = run_experiment(&experiment(setting, vec![Method::Nimo], pinned()));
        let m = mean_of(&report, "nimo");
        out.push(check(2, format!("{setting} nimo mse"), m <= 3.0 * reference, format!("{m:.4} <= {:.3}", 3.0 * reference)));
    }
    let vanilla = NimoRun { iters: 1000, ..pinned() };
    let report = run_experiment(&experiment(Setting::RegVanilla, vec![Method::Nimo, Method::Lasso], vanilla));
    let lasso = mean_of(&report, "lasso");
    let nimo = mean_of(&report, "nimo");
    out.push(check(2, "reg_vanilla lasso mse", lasso <= 0.05, format!("{lasso:.4} <= 0.05")));
    out.push(check(2, "reg_vanilla nimo mse", nimo <= 0.15, format!("{nimo:.4} <= 0.15")));
}

fn classification_criteria(out: &mut Vec<Check>) {
    let grid = |lambda_group, lr| NimoRun {
        lambdas: vec![1e-3, 1e-2],
        mus: vec![1e-2, 1e-1],
        lambda_group,
        noise: 0.2,
        lr,
        iters: 1500,
    };
    let report = run_experiment(&experiment(Setting::Cls1, vec![Method::Nimo, Method::Logistic], grid(0.01, 3e-3)));
    let nimo = mean_of(&report, "nimo");
    let logistic = mean_of(&report, "logistic");
    out.push(check(3, "cls1 nimo accuracy", nimo >= 0.85, format!("{nimo:.3} >= 0.85")));
    out.push(check(3, "cls1 logistic accuracy", logistic <= 0.70, format!("{logistic:.3} <= 0.70")));

    let report = run_experiment(&experiment(Setting::Cls2, vec![Method::Nimo], grid(0.03, 1e-2)));
    let nimo = mean_of(&report, "nimo");
    out.push(check(3, "cls2 nimo accuracy", nimo >= 0.78, format!("{nimo:.3} >= 0.78")));

    let single = NimoRun { lambdas: vec![1e-2], mus: vec![1e-2], lambda_group: 0.1, noise: 0.2, lr: 3e-3, iters: 1000 };
    let report = run_experiment(&experiment(Setting::Cls3, vec![Method::Nimo], single));
    let nimo = mean_of(&report, "nimo");
    out.push(check(3, "cls3 nimo accuracy", nimo >= 0.78, format!("{nimo:.3} >= 0.78")));
}

// ---------------------------------------------------------------------------
// Criterion 4

fn adaptive_ridge_lasso(out: &mut Vec<Check>) {
    let mut rng = SeededRng::new(404, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = normal_matrix(&mut rng, 50, 10);
        let truth: Vec<f64> = (0..10).map(|j| if j < 4 { rng.uniform_range(-3.0, 3.0) } else { 0.0 }).collect();
        let y: Vec<f64> = x.mul_vec(&truth).unwrap().iter().map(|v| v + 0.5 * rng.normal()).collect();
        let ar = fit_adaptive_ridge(&x, &y, rng.uniform_range(1.0, 20.0), 1e-12, 1_000_000).unwrap();
        let lasso = lasso_cd(&x, &y, ar.lasso_penalty, LassoOptions::default()).unwrap();
        for (a, b) in ar.beta.iter().zip(&lasso.coefficients) {
            worst = worst.max((a - b).abs());
        }
    }
    out.push(check(4, "adaptive ridge equals lasso", worst <= 1e-3, format!("max |diff| {worst:.2e} over 50 instances")));
}

// ---------------------------------------------------------------------------
// Criterion 5

fn weighted_sum(g: &DenseMatrix, u: &DenseMatrix) -> f64 {
    g.as_slice().iter().zip(u.as_slice()).map(|(a, b)| a * b).sum()
}

fn mlp_gradients(out: &mut Vec<Check>) {
    let mut meta = SeededRng::new(505, 0);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let d = 1 + (meta.next_u64() % 6) as usize;
        let h1 = 1 + (meta.next_u64() % 6) as usize;
        let h2 = 1 + (meta.next_u64() % 5) as usize;
        let n = 1 + (meta.next_u64() % 4) as usize;
        let range = if case % 2 == 0 { OutputRange::Regression } else { OutputRange::Classification };
        let cfg = NetworkConfig::new(d, h1, h2, range).with_noise_scale(0.0);
        let params = random_params(&cfg, &mut meta, 0.8);
        let x = uniform_matrix(&mut meta, n, d, 2.0);
        let u = uniform_matrix(&mut meta, n, d, 1.0);
        let mut rng = SeededRng::new(0, 0);
        let (_, cache) = forward_matrix(&params, &cfg, &x, &mut rng).unwrap();
        let analytic = backward(&params, &cache, &u).unwrap().to_flat();
        let base = params.to_flat();
        let mut probe = params.clone();
        let mut numeric = vec![0.0; base.len()];
        for k in 0..base.len() {
            let mut v = base.clone();
            v[k] = base[k] + h;
            probe.set_flat(&v).unwrap();
            let plus = weighted_sum(&forward_values(&probe, &cfg, &x, &mut rng).unwrap(), &u);
            v[k] = base[k] - h;
            probe.set_flat(&v).unwrap();
            let minus = weighted_sum(&forward_values(&probe, &cfg, &x, &mut rng).unwrap(), &u);
            numeric[k] = (plus - minus) / (2.0 * h);
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        worst = worst.max(diff / scale);
    }
    out.push(check(5, "network backward vs finite differences", worst <= 1e-4, format!("max rel err {worst:.2e} over 100 configs")));
}

fn through_solve_gradients(out: &mut Vec<Check>) {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = SeededRng::new(seed, 55);
        let cfg = NetworkConfig::new(3, 5, 4, OutputRange::Regression).with_noise_scale(0.0);
        let params = NetworkParams::init(&cfg, &mut rng);
        let x = normal_matrix(&mut rng, 20, 3);
        let y: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
        let mut penalty = PenaltyState::new(3, 0.7, 0.3, 1.0, 0.05);
        penalty.c = (0..3).map(|_| rng.uniform_range(0.5, 2.0)).collect();
        let loss = |p: &NetworkParams, c: &[f64]| {
            let mut pen = penalty.clone();
            pen.c = c.to_vec();
            regression_objective(p, &cfg, &x, &y, &pen, GradientMode::ThroughSolve, &mut SeededRng::new(0, 0)).unwrap().loss
        };
        let ev =
            regression_objective(&params, &cfg, &x, &y, &penalty, GradientMode::ThroughSolve, &mut SeededRng::new(0, 0))
                .unwrap();
        let mut analytic = ev.grad_params.to_flat();
        analytic.extend_from_slice(&ev.profile.grad_c);
        let base = params.to_flat();
        let mut numeric = Vec::new();
        for k in 0..base.len() {
            let (mut pp, mut pm) = (params.clone(), params.clone());
            let mut v = base.clone();
            v[k] += h;
            pp.set_flat(&v).unwrap();
            v[k] -= 2.0 * h;
            pm.set_flat(&v).unwrap();
            numeric.push((loss(&pp, &penalty.c) - loss(&pm, &penalty.c)) / (2.0 * h));
        }
        for j in 0..3 {
            let (mut cp, mut cm) = (penalty.c.clone(), penalty.c.clone());
            cp[j] += h;
            cm[j] -= h;
            numeric.push((loss(&params, &cp) - loss(&params, &cm)) / (2.0 * h));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = numeric.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        worst = worst.max(diff / scale);
    }
    out.push(check(5, "through-solve profile gradient", worst <= 1e-3, format!("max rel err {worst:.2e} over 10 instances")));
}

// ---------------------------------------------------------------------------
// Criterion 6

fn structural_invariants(out: &mut Vec<Check>) {
    let mut rng = SeededRng::new(606, 0);
    let mut failures = Vec::new();

    // g(0) = 0 in both output ranges, with training noise on.
    let mut zero_ok = true;
    for case in 0..200 {
        let range = if case % 2 == 0 { OutputRange::Regression } else { OutputRange::Classification };
        let d = 1 + case % 7;
        let cfg = NetworkConfig::new(d, 2 + case % 9, 1 + case % 5, range).with_train_mode(true);
        let params = random_params(&cfg, &mut rng, 3.0);
        let g = forward_values(&params, &cfg, &DenseMatrix::zeros(3, d), &mut rng).unwrap();
        zero_ok &= g.as_slice().iter().all(|&v| v == 0.0);
    }
    if !zero_ok {
        failures.push("g(0) != 0");
    }

    // g_j ignores x_j.
    let mut mask_ok = true;
    let cfg = NetworkConfig::new(6, 10, 5, OutputRange::Classification);
    let params = random_params(&cfg, &mut rng, 1.5);
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..6).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
        let j = (rng.next_u64() % 6) as usize;
        let mut moved = x.clone();
        moved[j] = rng.uniform_range(-100.0, 100.0);
        let (a, _) = forward_one(&params, &cfg, &x, j, &mut rng).unwrap();
        let (b, _) = forward_one(&params, &cfg, &moved, j, &mut rng).unwrap();
        mask_ok &= a.to_bits() == b.to_bits();
    }
    if !mask_ok {
        failures.push("masking");
    }

    // B = X when G = 0, directly and through a zero network.
    let x = normal_matrix(&mut rng, 8, 4);
    let zero_cfg = NetworkConfig::new(4, 5, 3, OutputRange::Regression);
    let via_net = design_matrix(&NetworkParams::zeros(&zero_cfg), &zero_cfg, &x, &mut rng).unwrap();
    if design_matrix_from(&x, &DenseMatrix::zeros(8, 4)).unwrap() != x || via_net != x {
        failures.push("B != X at G = 0");
    }

    // Effective-coefficient reconstruction.
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        for task in [Task::Regression, Task::Logistic] {
            let range = if task == Task::Regression { OutputRange::Regression } else { OutputRange::Classification };
            let cfg = NetworkConfig::new(5, 6, 5, range);
            let mut r = SeededRng::new(seed, 66);
            let model = FittedModel {
                intercept: r.normal(),
                coefficients: (0..5).map(|_| 2.0 * r.normal()).collect(),
                params: random_params(&cfg, &mut r, 2.0),
                cfg,
                stats: StandardizationStats {
                    means: (0..5).map(|_| r.normal()).collect(),
                    stddevs: (0..5).map(|_| r.uniform_range(0.5, 2.0)).collect(),
                },
                task,
            };
            let xs = uniform_matrix(&mut r, 30, 5, 3.0);
            let eff = model.effective_coefficients(&xs).unwrap();
            let rec = eff.reconstruct(model.intercept, &model.stats.apply(&xs).unwrap());
            let eta = model.linear_predictor(&xs).unwrap();
            for (a, b) in rec.iter().zip(&eta) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    if worst > 1e-10 {
        failures.push("reconstruction");
    }

    // δ = 1 scale penalty is bit-identical to μ Σ c².
    let mut bits_ok = true;
    for _ in 0..1000 {
        let c: Vec<f64> = (0..6).map(|_| rng.uniform_range(1e-6, 10.0)).collect();
        let mu = rng.uniform_range(0.0, 5.0);
        let plain = mu * c.iter().map(|v| v * v).sum::<f64>();
        bits_ok &= scale_penalty(&c, mu, 1.0).to_bits() == plain.to_bits();
        let b = normal_matrix(&mut rng, 4, 6);
        let y: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let beta: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let fit = b.mul_vec(&beta).unwrap();
        let rss: f64 = y.iter().zip(&fit).map(|(a, f)| (a - f).powi(2)).sum();
        bits_ok &= profile_loss_regression(&b, &y, &beta, &c, mu, 1.0).unwrap().to_bits() == (rss + plain).to_bits();
    }
    if !bits_ok {
        failures.push("delta = 1 bit equality");
    }

    let detail = if failures.is_empty() {
        format!("all hold; reconstruction max err {worst:.2e}")
    } else {
        format!("violated: {}", failures.join(", "))
    };
    out.push(check(6, "structural invariants", failures.is_empty(), detail));
}

// ---------------------------------------------------------------------------
// Criterion 7

fn irls_vs_newton(out: &mut Vec<Check>) {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = SeededRng::new(seed, 77);
        let n = 40 + (seed as usize % 4) * 10;
        let d = 2 + seed as usize % 4;
        let x = normal_matrix(&mut rng, n, d);
        let w: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let y: Vec<f64> =
            (0..n).map(|i| f64::from(u8::from(rng.bernoulli(sigmoid(0.3 + nimo::numerics::dot(x.row(i), &w)))))).collect();
        let lambda = rng.uniform_range(0.005, 0.05);
        let data = TrainData {
            x_train: x.clone(),
            y_train: y.clone(),
            x_val: DenseMatrix::zeros(0, d),
            y_val: vec![],
            stats: StandardizationStats::identity(d),
        };
        let cfg = NetworkConfig::new(d, 3, 3, OutputRange::Classification);
        let tc = TrainConfig { max_iters: 200, freeze_network: true, freeze_scale: true, patience: None, ..Default::default() };
        let fit = train_classification_from(&data, &cfg, &tc, PenaltyState::new(d, lambda, 0.0, 1.0, 0.0), NetworkParams::zeros(&cfg))
            .unwrap();
        // Per-row weights: the oracle sees n·λ.
        let newton = logistic_newton(&x, &y, n as f64 * lambda, 0.0, LogisticOptions::default()).unwrap();
        worst = worst.max((fit.model.intercept - newton.intercept).abs());
        for (a, b) in fit.model.coefficients.iter().zip(&newton.coefficients) {
            worst = worst.max((a - b).abs());
        }
    }
    out.push(check(7, "frozen IRLS matches Newton", worst <= 1e-4, format!("max |diff| {worst:.2e} over 20 instances")));
}

// ---------------------------------------------------------------------------
// Criterion 9

fn determinism(out: &mut Vec<Check>) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = experiment(
        Setting::Reg1,
        vec![Method::Nimo, Method::Lasso, Method::Ridge, Method::Mlp],
        NimoRun { lambdas: vec![0.01, 0.1], mus: vec![0.01], iters: 200, ..REGRESSION },
    );
    cfg.repeats = 2;
    cfg.mlp.train.max_iters = 200;
    let files = ["report.json", "metrics.csv", "coefficients.csv", "norms.csv", "traces.csv", "predictions.csv"];
    let mut same = true;
    for (name, workers) in [("a", 1), ("b", 4)] {
        cfg.output_dir = Some(dir.path().join(name));
        cfg.workers = Some(workers);
        run(&cfg).unwrap();
    }
    for f in files {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        same &= !a.is_empty() && a == b;
    }
    out.push(check(9, "byte-identical reports", same, format!("{} output files compared across two runs", files.len())));
}

fn main() {
    let start = Instant::now();
    let mut checks = Vec::new();
    adaptive_ridge_lasso(&mut checks);
    mlp_gradients(&mut checks);
    through_solve_gradients(&mut checks);
    structural_invariants(&mut checks);
    irls_vs_newton(&mut checks);
    determinism(&mut checks);
    toy_criteria(&mut checks);
    regression_criteria(&mut checks);
    classification_criteria(&mut checks);

    checks.sort_by_key(|c| c.id);
    println!("\nsummary ({:.0}s):", start.elapsed().as_secs_f64());
    for c in &checks {
        println!("{} [{}] {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.name);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
