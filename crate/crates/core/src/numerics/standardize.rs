use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use crate::error::{dims, NimoError, Result};

/// Per-column location and scale used to map raw features to zero mean and
/// unit (population, `1/n`) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

impl StandardizationStats {
    /// Computes column statistics of `x`.
    pub fn fit(x: &DenseMatrix) -> Result<Self> {
        let (n, d) = x.shape();
        if n < 2 {
            return Err(NimoError::InsufficientRows { needed: 2, available: n });
        }
        if !x.is_finite() {
            return Err(NimoError::NonFinite("standardization input"));
        }
        let mut means = vec![0.0; d];
        for i in 0..n {
            for (m, v) in means.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let mut vars = vec![0.0; d];
        for i in 0..n {
            for ((s, v), m) in vars.iter_mut().zip(x.row(i)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let mut stddevs = Vec::with_capacity(d);
        for (j, s) in vars.into_iter().enumerate() {
            let sd = (s / n as f64).sqrt();
            if !(sd > 0.0) {
                return Err(NimoError::ConstantColumn(j));
            }
            stddevs.push(sd);
        }
        Ok(Self { means, stddevs })
    }

    /// Identity transform for `d` columns.
    pub fn identity(d: usize) -> Self {
        Self {
            means: vec![0.0; d],
            stddevs: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(x)?;
        Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| {
            (x[(i, j)] - self.means[j]) / self.stddevs[j]
        }))
    }

    pub fn invert(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(z)?;
        Ok(DenseMatrix::from_fn(z.rows(), z.cols(), |i, j| {
            z[(i, j)] * self.stddevs[j] + self.means[j]
        }))
    }

    fn check(&self, x: &DenseMatrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(dims(format!("{} columns", self.dim()), x.cols()));
        }
        if !x.is_finite() {
            return Err(NimoError::NonFinite("standardization input"));
        }
        Ok(())
    }
}

/// Standardizes every column of `x` and returns the statistics used.
pub fn standardize(x: &DenseMatrix) -> Result<(DenseMatrix, StandardizationStats)> {
    let stats = StandardizationStats::fit(x)?;
    let z = stats.apply(x)?;
    Ok((z, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_column() {
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let (z, stats) = standardize(&x).unwrap();
        let sigma = (2.0f64 / 3.0).sqrt();
        assert_eq!(stats.means, vec![2.0]);
        assert!((stats.stddevs[0] - sigma).abs() < 1e-15);
        let expected = [-1.0 / sigma, 0.0, 1.0 / sigma];
        for (i, e) in expected.iter().enumerate() {
            assert!((z[(i, 0)] - e).abs() < 1e-12);
        }
        assert!((z[(2, 0)] - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn already_standardized_is_unchanged() {
        let x = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let (z, _) = standardize(&x).unwrap();
        for (a, b) in z.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_and_non_finite() {
        let x = DenseMatrix::from_rows(&[vec![0.0, 5.0], vec![1.0, 5.0], vec![2.0, 5.0]]).unwrap();
        assert!(matches!(standardize(&x), Err(NimoError::ConstantColumn(1))));
        let one = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(standardize(&one), Err(NimoError::InsufficientRows { .. })));
    }
}
