use std::path::PathBuf;

use super::{ensure_dir, write_csv, ExperimentConfig, ModelSpec};
use crate::clp::{step_coefficients, ClpSimulator};
use crate::error::{Error, Result};
use crate::euler::{EulerConfig, EulerSimulator};
use crate::grid::TimeGrid;
use crate::sim::RunSpec;
use crate::stats::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityParam {
    Lambda,
    Nu,
    V0,
    Theta,
    Hurst,
    NStates,
}

impl SensitivityParam {
    pub const ALL: [SensitivityParam; 6] = [
        SensitivityParam::Lambda,
        SensitivityParam::Nu,
        SensitivityParam::V0,
        SensitivityParam::Theta,
        SensitivityParam::Hurst,
        SensitivityParam::NStates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SensitivityParam::Lambda => "lambda",
            SensitivityParam::Nu => "nu",
            SensitivityParam::V0 => "v0",
            SensitivityParam::Theta => "theta",
            SensitivityParam::Hurst => "h",
            SensitivityParam::NStates => "N",
        }
    }

    fn value(self, m: &ModelSpec) -> Option<f64> {
        Some(match self {
            SensitivityParam::Lambda => m.lambda,
            SensitivityParam::Nu => m.nu,
            SensitivityParam::V0 => m.v0,
            SensitivityParam::Theta => m.theta,
            SensitivityParam::Hurst => m.hurst?,
            SensitivityParam::NStates => {
                m.hurst?;
                m.n_states as f64
            }
        })
    }

    fn bumped(self, m: &ModelSpec, cfg: &ExperimentConfig) -> (ModelSpec, f64) {
        let mut b = m.clone();
        let d = cfg.sens_bump;
        let bump = match self {
            SensitivityParam::Lambda => {
                b.lambda += d;
                d
            }
            SensitivityParam::Nu => {
                b.nu += d;
                d
            }
            SensitivityParam::V0 => {
                b.v0 += d;
                d
            }
            SensitivityParam::Theta => {
                b.theta += d;
                d
            }
            SensitivityParam::Hurst => {
                b.hurst = b.hurst.map(|h| h + d);
                d
            }
            SensitivityParam::NStates => {
                b.n_states += cfg.sens_bump_n;
                cfg.sens_bump_n as f64
            }
        };
        (b, bump)
    }
}

/// Finite-difference sensitivity of the projection residual `E[e^2]` to one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub param: SensitivityParam,
    pub base_value: f64,
    pub bump: f64,
    /// `E[e^2]` at the base point.
    pub e2: f64,
    pub se_e2: f64,
    pub e2_bumped: f64,
    /// `(E_bumped - E) / bump`, with the standard error of the paired difference.
    pub sensitivity: f64,
    pub se_sensitivity: f64,
    /// `sensitivity * base_value / E`.
    pub relative: f64,
    pub se_relative: f64,
    /// Same difference from `E[X^2] - (alpha beta^2 + alpha^2)`.
    pub identity_sensitivity: f64,
    pub se_identity_sensitivity: f64,
}

/// Per-path residual and identity-form samples for one parameter point.
struct Residuals {
    residual: Vec<f64>,
    identity: Vec<f64>,
}

fn residuals(spec: &ModelSpec, cfg: &ExperimentConfig) -> Result<Residuals> {
    let model = spec.build()?;
    let t0 = model.params.t0;
    let t1 = t0 + cfg.sens_window;
    let clp = ClpSimulator::new(&model, &TimeGrid::uniform(t0, t1, 1)?)?;
    let c = step_coefficients(&clp.initial_state(), &clp.steps[0], &model)?;
    let (alpha, beta) = (c.alpha, c.beta);

    let grid = TimeGrid::uniform(t0, t1, cfg.sens_substeps)?;
    let euler = EulerSimulator::new(&model, &grid, EulerConfig::default())?;
    let out = euler.simulate(&RunSpec::new(cfg.n_paths, cfg.seed))?;
    let ig_second_moment = alpha * beta * beta + alpha * alpha;
    Ok(Residuals {
        residual: out.x_t.iter().zip(&out.z_t).map(|(x, z)| (x - alpha - beta * z).powi(2)).collect(),
        identity: out.x_t.iter().map(|x| x * x - ig_second_moment).collect(),
    })
}

/// Mean and standard error of `(b_i - a_i) / scale`.
fn paired(a: &[f64], b: &[f64], scale: f64) -> (f64, f64) {
    if scale == 0.0 {
        return (0.0, 0.0);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(a, b)| (b - a) / scale).collect();
    let m = mean(&d);
    let n = d.len() as f64;
    let var = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Bumps each parameter in turn with common random numbers. `N` and `h` rows
/// are skipped for models without a Hurst parametrization.
pub fn sensitivity_table(cfg: &ExperimentConfig) -> Result<Vec<SensitivityRow>> {
    cfg.validate()?;
    if cfg.n_paths < 2 {
        return Err(Error::Config("sensitivity needs at least two paths".into()));
    }
    let base = residuals(&cfg.model, cfg)?;
    let e2 = mean(&base.residual);
    let (_, se_e2) = paired(&vec![0.0; base.residual.len()], &base.residual, 1.0);
    let mut rows = Vec::new();
    for param in SensitivityParam::ALL {
        let Some(base_value) = param.value(&cfg.model) else { continue };
        let (spec, bump) = param.bumped(&cfg.model, cfg);
        let bumped = if bump == 0.0 { None } else { Some(residuals(&spec, cfg)?) };
        let (b_res, b_id) = match &bumped {
            Some(r) => (r.residual.as_slice(), r.identity.as_slice()),
            None => (base.residual.as_slice(), base.identity.as_slice()),
        };
        let (sensitivity, se_sensitivity) = paired(&base.residual, b_res, bump);
        let (identity_sensitivity, se_identity_sensitivity) = paired(&base.identity, b_id, bump);
        rows.push(SensitivityRow {
            param,
            base_value,
            bump,
            e2,
            se_e2,
            e2_bumped: mean(b_res),
            sensitivity,
            se_sensitivity,
            relative: sensitivity * base_value / e2,
            se_relative: se_sensitivity * base_value.abs() / e2,
            identity_sensitivity,
            se_identity_sensitivity,
        });
    }
    Ok(rows)
}

/// Writes `sensitivity.csv`.
pub fn cmd_sensitivity(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rows = sensitivity_table(cfg)?;
    ensure_dir(&cfg.out)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.param.name().to_string(),
                r.base_value.to_string(),
                r.bump.to_string(),
                r.e2.to_string(),
                r.se_e2.to_string(),
                r.e2_bumped.to_string(),
                r.sensitivity.to_string(),
                r.se_sensitivity.to_string(),
                r.relative.to_string(),
                r.se_relative.to_string(),
                r.identity_sensitivity.to_string(),
                r.se_identity_sensitivity.to_string(),
            ]
        })
        .collect();
    let path = cfg.out.join("sensitivity.csv");
    write_csv(
        &path,
        &[
            "param",
            "value",
            "bump",
            "e2",
            "se_e2",
            "e2_bumped",
            "sensitivity",
            "se_sensitivity",
            "relative",
            "se_relative",
            "identity_sensitivity",
            "se_identity_sensitivity",
        ],
        &table,
    )?;
    Ok(vec![path])
}
