use serde::{Deserialize, Serialize};

use super::TrainOutcome;
use crate::error::{NimoError, Result};

/// `n` points spaced evenly in log10 between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|k| {
                    if k == n - 1 {
                        hi
                    } else {
                        10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

/// Seven points from 1e-3 to 10.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-3, 10.0, 7)
}

/// Five points from 1e-4 to 1.
pub fn default_mu_grid() -> Vec<f64> {
    log_grid(1e-4, 1.0, 5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug)]
pub struct GridResult {
    pub best: usize,
    pub points: Vec<GridPoint>,
    pub outcomes: Vec<TrainOutcome>,
}

impl GridResult {
    pub fn best_outcome(&self) -> &TrainOutcome {
        &self.outcomes[self.best]
    }

    pub fn best_point(&self) -> GridPoint {
        self.points[self.best]
    }

    /// Selects the best of outcomes computed elsewhere, one per point.
    pub fn from_outcomes(points: Vec<GridPoint>, outcomes: Vec<TrainOutcome>) -> Result<Self> {
        if points.is_empty() || points.len() != outcomes.len() {
            return Err(crate::error::dims(points.len(), outcomes.len()));
        }
        let best = select_best(&outcomes);
        Ok(Self { best, points, outcomes })
    }
}

/// Row-major `λ × μ̃` cross product.
pub fn grid_points(lambdas: &[f64], mus: &[f64]) -> Result<Vec<GridPoint>> {
    if lambdas.is_empty() || mus.is_empty() {
        return Err(NimoError::InvalidArgument("empty penalty grid".into()));
    }
    Ok(lambdas
        .iter()
        .flat_map(|&lambda| mus.iter().map(move |&mu| GridPoint { lambda, mu }))
        .collect())
}

/// Fits every `(λ, μ̃)` pair and keeps the lowest validation loss; ties go to
/// the earlier point.
pub fn grid_search<F>(lambdas: &[f64], mus: &[f64], mut fit: F) -> Result<GridResult>
where
    F: FnMut(GridPoint) -> Result<TrainOutcome>,
{
    let points = grid_points(lambdas, mus)?;
    let outcomes = points.iter().map(|&p| fit(p)).collect::<Result<Vec<_>>>()?;
    let best = select_best(&outcomes);
    Ok(GridResult { best, points, outcomes })
}

fn select_best(outcomes: &[TrainOutcome]) -> usize {
    let mut best = 0;
    for (k, o) in outcomes.iter().enumerate() {
        if o.best_val_loss < outcomes[best].best_val_loss {
            best = k;
        }
    }
    best
}
