use nimo::mlp::{forward_values, NetworkConfig, NetworkParams, OutputRange};
use nimo::model::{design_matrix, FittedModel, Task};
use nimo::numerics::{DenseMatrix, SeededRng, StandardizationStats};

fn random_model(seed: u64, d: usize, task: Task) -> FittedModel {
    let mut rng = SeededRng::new(seed, 9);
    let range = match task {
        Task::Regression => OutputRange::Regression,
        Task::Logistic => OutputRange::Classification,
    };
    let cfg = NetworkConfig::new(d, 6, 5, range);
    let mut params = NetworkParams::init(&cfg, &mut rng);
    // Larger weights than the initializer so corrections are far from zero.
    let flat: Vec<f64> = params.to_flat().iter().map(|w| 3.0 * w).collect();
    params.set_flat(&flat).unwrap();
    FittedModel {
        intercept: rng.normal(),
        coefficients: (0..d).map(|_| rng.normal() * 2.0).collect(),
        params,
        cfg,
        stats: StandardizationStats {
            means: (0..d).map(|_| rng.normal()).collect(),
            stddevs: (0..d).map(|_| rng.uniform_range(0.5, 2.0)).collect(),
        },
        task,
    }
}

#[test]
fn design_matrix_matches_scalar_loop() {
    let mut rng = SeededRng::new(1, 0);
    let cfg = NetworkConfig::new(3, 5, 4, OutputRange::Regression).with_train_mode(false);
    let params = NetworkParams::init(&cfg, &mut rng);
    let x = DenseMatrix::from_fn(4, 3, |_, _| rng.normal());
    let b = design_matrix(&params, &cfg, &x, &mut SeededRng::new(0, 0)).unwrap();
    let g = forward_values(&params, &cfg, &x, &mut SeededRng::new(0, 0)).unwrap();
    for i in 0..4 {
        for j in 0..3 {
            assert_eq!(b[(i, j)], x[(i, j)] * (1.0 + g[(i, j)]));
        }
    }
}

#[test]
fn effective_coefficients_reconstruct_predictions() {
    for seed in 0..20 {
        for task in [Task::Regression, Task::Logistic] {
            let m = random_model(seed, 5, task);
            let mut rng = SeededRng::new(seed, 1);
            let x = DenseMatrix::from_fn(30, 5, |_, _| rng.uniform_range(-3.0, 3.0));
            let eff = m.effective_coefficients(&x).unwrap();
            let z = m.stats.apply(&x).unwrap();
            let rec = eff.reconstruct(m.intercept, &z);
            let eta = m.linear_predictor(&x).unwrap();
            for (a, b) in rec.iter().zip(&eta) {
                assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn single_feature_moves_are_linear() {
    for seed in 0..10 {
        let mut m = random_model(seed, 4, Task::Regression);
        m.stats = StandardizationStats::identity(4);
        let origin = m.predict(&DenseMatrix::zeros(1, 4)).unwrap()[0];
        assert_eq!(origin, m.intercept);
        let mut rng = SeededRng::new(seed, 2);
        for j in 0..4 {
            let t = rng.uniform_range(-3.0, 3.0);
            let mut x = DenseMatrix::zeros(1, 4);
            x[(0, j)] = t;
            // The other corrections see an all-zero context and vanish exactly.
            assert_eq!(m.effective_coefficients(&x).unwrap().0.row(0)[j], m.coefficients[j]);
            let moved = m.predict(&x).unwrap()[0];
            assert!((moved - origin - m.coefficients[j] * t).abs() <= 1e-12);
        }
    }
}

#[test]
fn zero_network_equals_linear_model() {
    let mut m = random_model(3, 4, Task::Regression);
    m.params = NetworkParams::zeros(&m.cfg);
    let mut rng = SeededRng::new(3, 3);
    let x = DenseMatrix::from_fn(10, 4, |_, _| rng.normal());
    let z = m.stats.apply(&x).unwrap();
    let pred = m.predict(&x).unwrap();
    let eff = m.effective_coefficients(&x).unwrap();
    for i in 0..10 {
        assert_eq!(eff.0.row(i), m.coefficients.as_slice());
        let lin: f64 = m.intercept + (0..4).map(|j| z[(i, j)] * m.coefficients[j]).sum::<f64>();
        assert!((pred[i] - lin).abs() <= 1e-12);
    }
}

#[test]
fn logistic_predictions_are_probabilities() {
    let m = random_model(4, 3, Task::Logistic);
    let mut rng = SeededRng::new(4, 4);
    let x = DenseMatrix::from_fn(50, 3, |_, _| rng.normal() * 5.0);
    assert!(m.predict(&x).unwrap().iter().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn prediction_is_deterministic_and_noise_free() {
    let mut m = random_model(5, 3, Task::Regression);
    m.cfg = m.cfg.with_train_mode(true);
    let x = DenseMatrix::from_fn(8, 3, |i, j| (i * 3 + j) as f64 * 0.1);
    assert_eq!(m.predict(&x).unwrap(), m.predict(&x).unwrap());
}

#[test]
fn json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = random_model(6, 4, Task::Logistic);
    let path = dir.path().join("model.json");
    m.save(&path).unwrap();
    assert_eq!(FittedModel::load(&path).unwrap(), m);
}
