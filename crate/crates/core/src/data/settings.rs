use std::f64::consts::FRAC_2_PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::NimoError;
use crate::model::Task;
use crate::numerics::sigmoid;

/// Synthetic benchmark settings. Features are drawn from U(−2, 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    RegToy,
    Reg1,
    Reg2,
    Reg3,
    RegVanilla,
    Cls1,
    Cls2,
    Cls3,
}

pub const ALL_SETTINGS: [Setting; 8] = [
    Setting::RegToy,
    Setting::Reg1,
    Setting::Reg2,
    Setting::Reg3,
    Setting::RegVanilla,
    Setting::Cls1,
    Setting::Cls2,
    Setting::Cls3,
];

/// Linear part of a generator: the coefficient each feature carries at the
/// baseline level, plus the constant term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::RegToy => "reg_toy",
            Setting::Reg1 => "reg1",
            Setting::Reg2 => "reg2",
            Setting::Reg3 => "reg3",
            Setting::RegVanilla => "reg_vanilla",
            Setting::Cls1 => "cls1",
            Setting::Cls2 => "cls2",
            Setting::Cls3 => "cls3",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Setting::RegToy | Setting::Cls1 => 3,
            Setting::Reg1 => 5,
            Setting::Reg2 | Setting::RegVanilla | Setting::Cls2 => 10,
            Setting::Reg3 | Setting::Cls3 => 50,
        }
    }

    pub fn task(self) -> Task {
        match self {
            Setting::Cls1 | Setting::Cls2 | Setting::Cls3 => Task::Logistic,
            _ => Task::Regression,
        }
    }

    pub fn ground_truth(self) -> GroundTruth {
        let mut b = vec![0.0; self.dim()];
        let mut set = |idx: &[(usize, f64)]| idx.iter().for_each(|&(j, v)| b[j - 1] = v);
        let intercept = match self {
            Setting::RegToy => {
                set(&[(1, 3.0), (2, -3.0)]);
                0.0
            }
            Setting::Reg1 => {
                set(&[(1, 3.0), (2, -2.0), (3, 2.0)]);
                0.0
            }
            Setting::Reg2 => {
                set(&[(1, 1.0), (2, 2.0), (3, -1.0)]);
                0.0
            }
            Setting::Reg3 => {
                set(&[(1, -2.0), (2, 2.0), (4, 3.0), (5, -1.0)]);
                0.0
            }
            Setting::RegVanilla => {
                for (j, v) in b.iter_mut().enumerate() {
                    *v = j as f64 - 5.0;
                }
                0.0
            }
            Setting::Cls1 => {
                set(&[(1, 2.0), (2, -2.0)]);
                1.0
            }
            Setting::Cls2 => {
                set(&[(1, 10.0), (2, 20.0), (3, -20.0), (4, 10.0)]);
                -10.0
            }
            Setting::Cls3 => {
                set(&[(1, -20.0), (2, 20.0), (4, 30.0), (5, -10.0)]);
                0.0
            }
        };
        GroundTruth { coefficients: b, intercept }
    }

    /// Noiseless latent response. `x` uses 0-based storage of the 1-based
    /// features `x1 … xd`.
    pub fn latent(self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "feature count");
        let v = |k: usize| x[k - 1];
        match self {
            Setting::RegToy => 3.0 * v(1) * (1.0 + (10.0 * v(2)).tanh()) - 3.0 * v(2) * (1.0 + (-2.0 * v(1)).sin()),
            Setting::Reg1 => {
                3.0 * v(1) * (1.0 + (2.0 * sigmoid(v(2) * v(3)) - 1.0)) - 2.0 * v(2) + 2.0 * v(3)
            }
            Setting::Reg2 => {
                v(1) * (1.0 + (v(2) * v(3) + v(4).sin()).tanh())
                    + 2.0 * v(2) * (1.0 + (2.0 * v(1)).sin())
                    - v(3) * (1.0 + FRAC_2_PI * (v(2) * v(4)).atan())
            }
            Setting::Reg3 => {
                -2.0 * v(1) * (1.0 + (v(2) * v(4)).tanh())
                    + 2.0 * v(2) * (1.0 + FRAC_2_PI * (v(4) - v(5)).atan())
                    + 3.0 * v(4) * (1.0 + (v(2) + v(5).sin()).tanh())
                    - v(5) * (1.0 + (2.0 * sigmoid(v(1) * v(4)) - 1.0))
            }
            Setting::RegVanilla => x.iter().enumerate().map(|(j, xj)| (j as f64 - 5.0) * xj).sum(),
            Setting::Cls1 => {
                2.0 * v(1) * (1.0 + 2.0 * v(2).tanh())
                    - 2.0 * v(2) * (1.0 + 3.0 * (2.0 * v(1)).sin() + (2.0 * v(1)).tanh())
                    + 1.0
            }
            Setting::Cls2 => {
                10.0 * v(1) * (1.0 + 2.0 * (2.0 * v(2)).tanh() + v(4).sin())
                    + 20.0 * v(2) * (1.0 + 2.0 * (2.0 * v(1)).cos())
                    - 20.0 * v(3) * (1.0 + 2.0 * (v(2) * v(4)).atan())
                    + 10.0 * v(4)
                    - 10.0
            }
            Setting::Cls3 => {
                -20.0 * v(1) * (1.0 + (v(2) * v(4)).tanh())
                    + 20.0 * v(2) * (1.0 + FRAC_2_PI * (v(4) - v(5)).atan())
                    + 30.0 * v(4) * (1.0 + (v(2) + v(5).sin()).tanh())
                    - 10.0 * v(5) * (1.0 + (2.0 * sigmoid(v(1) * v(4)) - 1.0))
            }
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = NimoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace(['-', ' '], "_");
        let found = match key.as_str() {
            "reg_toy" | "toy" | "reg0" | "setting0" => Setting::RegToy,
            "reg1" => Setting::Reg1,
            "reg2" => Setting::Reg2,
            "reg3" => Setting::Reg3,
            "reg_vanilla" | "vanilla" | "reg4" => Setting::RegVanilla,
            "cls1" => Setting::Cls1,
            "cls2" => Setting::Cls2,
            "cls3" => Setting::Cls3,
            _ => return Err(NimoError::UnknownSetting(s.to_string())),
        };
        Ok(found)
    }
}
