use crate::error::{dims, Result};
use crate::numerics::{sigmoid, Cholesky, DenseMatrix};

/// Probabilities are clamped to `[PI_CLAMP, 1 − PI_CLAMP]`.
pub const PI_CLAMP: f64 = 1e-12;

/// Linearization of the logistic likelihood at the current predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlsState {
    pub eta: Vec<f64>,
    pub pi: Vec<f64>,
    pub w: Vec<f64>,
    /// Working response `η + (y − π) / w`.
    pub z: Vec<f64>,
}

pub fn irls_working_quantities(b: &DenseMatrix, beta: &[f64], intercept: f64, y: &[f64]) -> Result<IrlsState> {
    if y.len() != b.rows() {
        return Err(dims(b.rows(), y.len()));
    }
    let eta: Vec<f64> = b.mul_vec(beta)?.into_iter().map(|v| v + intercept).collect();
    let pi: Vec<f64> = eta.iter().map(|&e| sigmoid(e).clamp(PI_CLAMP, 1.0 - PI_CLAMP)).collect();
    let w: Vec<f64> = pi.iter().map(|p| p * (1.0 - p)).collect();
    let z = (0..eta.len()).map(|i| eta[i] + (y[i] - pi[i]) / w[i]).collect();
    Ok(IrlsState { eta, pi, w, z })
}

/// Weighted ridge step `γ = (X̃ᵀWX̃ + λI)⁻¹ X̃ᵀWz` with `X̃ = B D_c`.
///
/// With `fit_intercept` a leading unpenalized column of ones is added; the
/// returned pair is `(intercept, γ)`.
pub fn irls_gamma_update(
    b: &DenseMatrix,
    c: &[f64],
    state: &IrlsState,
    lambda: f64,
    fit_intercept: bool,
) -> Result<(f64, Vec<f64>)> {
    if c.len() != b.cols() {
        return Err(dims(b.cols(), c.len()));
    }
    if state.w.len() != b.rows() {
        return Err(dims(b.rows(), state.w.len()));
    }
    let (n, d) = b.shape();
    let off = usize::from(fit_intercept);
    let k = d + off;
    let xt = DenseMatrix::from_fn(n, k, |i, j| {
        if j < off {
            1.0
        } else {
            b[(i, j - off)] * c[j - off]
        }
    });
    let mut a = xt.weighted_gram(Some(&state.w))?;
    for j in off..k {
        a.as_mut_slice()[j * k + j] += lambda;
    }
    let wz: Vec<f64> = state.w.iter().zip(&state.z).map(|(w, z)| w * z).collect();
    let rhs = xt.t_mul_vec(&wz)?;
    let sol = Cholesky::factor(&a)?.solve(&rhs)?;
    let intercept = if fit_intercept { sol[0] } else { 0.0 };
    Ok((intercept, sol[off..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ridge_closed_form;

    #[test]
    fn zero_coefficients_give_quarter_weights() {
        let b = DenseMatrix::from_rows(&[vec![1.0], vec![-2.0]]).unwrap();
        let s = irls_working_quantities(&b, &[0.0], 0.0, &[1.0, 0.0]).unwrap();
        assert_eq!(s.pi, vec![0.5, 0.5]);
        assert_eq!(s.w, vec![0.25, 0.25]);
        assert_eq!(s.z, vec![2.0, -2.0]);
    }

    #[test]
    fn exact_probabilities_give_zero_residual() {
        let b = DenseMatrix::from_rows(&[vec![0.3], vec![-1.1]]).unwrap();
        let beta = [0.8];
        let s0 = irls_working_quantities(&b, &beta, 0.1, &[0.0, 0.0]).unwrap();
        let s = irls_working_quantities(&b, &beta, 0.1, &s0.pi).unwrap();
        for (z, e) in s.z.iter().zip(&s.eta) {
            assert!((z - e).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_weights_reduce_to_ridge() {
        let b = DenseMatrix::from_rows(&[vec![1.0, 0.2], vec![0.5, -1.0], vec![-0.4, 0.3]]).unwrap();
        let z = vec![0.5, -1.0, 2.0];
        let state = IrlsState { eta: vec![0.0; 3], pi: vec![0.5; 3], w: vec![1.0; 3], z: z.clone() };
        let (_, g) = irls_gamma_update(&b, &[1.0, 1.0], &state, 0.3, false).unwrap();
        let r = ridge_closed_form(&b, &z, 0.3).unwrap();
        for (a, b) in g.iter().zip(&r) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_penalty_shrinks_to_zero() {
        let b = DenseMatrix::from_rows(&[vec![1.0, 0.2], vec![0.5, -1.0]]).unwrap();
        let s = irls_working_quantities(&b, &[0.0, 0.0], 0.0, &[1.0, 0.0]).unwrap();
        let (_, g) = irls_gamma_update(&b, &[1.0, 1.0], &s, 1e12, true).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn extreme_predictor_stays_finite() {
        let b = DenseMatrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let s = irls_working_quantities(&b, &[800.0], 0.0, &[0.0, 1.0]).unwrap();
        assert!(s.z.iter().chain(&s.w).all(|v| v.is_finite()));
        assert!(s.w.iter().all(|&w| w > 0.0));
    }
}
