//! Dense linear algebra, standardization and seeded randomness shared by all
//! other modules. All reals are `f64`.

mod linalg;
mod matrix;
mod rng;
mod standardize;

pub use linalg::{relative_residual, ridge_closed_form, solve_spd, Cholesky};
pub use matrix::{axpy, dot, mean, norm2, norm_inf, DenseMatrix};
pub use rng::SeededRng;
pub use standardize::{standardize, StandardizationStats};

/// Logistic sigmoid, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
