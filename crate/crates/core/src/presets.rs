//! Named parameter sets used by the experiments.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{InitialCurve, Model, ModelParams};

/// Parameter sets `(lambda, nu, v0, theta, rho, H, N)` of the numerical studies,
/// plus the stressed set used to exercise the slope constraint and a Heston
/// collapse configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Set1,
    Set2,
    Set3,
    /// Set 1 with `nu = 0.3, v0 = 0.02, theta = 0.02`.
    Extreme,
    /// `N = 1, omega = 1, x = 0` with the linear curve; `lambda = 2, nu = 0.2,
    /// v0 = 0.09, theta = 0.04`.
    Heston,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Set1,
        Preset::Set2,
        Preset::Set3,
        Preset::Extreme,
        Preset::Heston,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Set1 => "set1",
            Preset::Set2 => "set2",
            Preset::Set3 => "set3",
            Preset::Extreme => "extreme",
            Preset::Heston => "heston",
        }
    }

    pub fn params(self) -> Result<ModelParams> {
        match self {
            Preset::Set1 => ModelParams::from_hurst(0.25, 0.1, 0.02, 0.5, 0.7, 0.3, 5),
            Preset::Set2 => ModelParams::from_hurst(0.1, 0.2, 0.1, 0.7, -0.7, 0.1, 10),
            Preset::Set3 => ModelParams::from_hurst(0.0, 0.31, 0.1, 0.02, 0.7, 0.3, 20),
            Preset::Extreme => ModelParams::from_hurst(0.25, 0.3, 0.02, 0.02, 0.7, 0.3, 5),
            Preset::Heston => ModelParams::heston(2.0, 0.2, 0.09, 0.04, 0.0),
        }
    }

    pub fn curve(self) -> InitialCurve {
        match self {
            Preset::Heston => InitialCurve::HestonLinear,
            _ => InitialCurve::LiftedDefault,
        }
    }

    pub fn model(self) -> Result<Model> {
        Model::new(self.params()?, self.curve())
    }

    /// Hurst index behind the preset, when it has one.
    pub fn hurst(self) -> Option<f64> {
        match self {
            Preset::Set1 | Preset::Set3 | Preset::Extreme => Some(0.3),
            Preset::Set2 => Some(0.1),
            Preset::Heston => None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}'")))
    }
}
