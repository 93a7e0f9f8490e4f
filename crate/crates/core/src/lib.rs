//! Linear models whose coefficients are modulated by a constrained neural
//! correction network, trained by profile likelihood with closed-form
//! adaptive-ridge coefficient updates.

pub mod baselines;
pub mod data;
pub mod error;
pub mod mlp;
pub mod model;
pub mod optimize;
pub mod numerics;

pub use error::{NimoError, Result};
