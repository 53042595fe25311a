//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! preset = set1
//! nu = 0.3          # overrides the preset
//! scheme = clp, euler
//! dt = 5, 2.15, 1, 0.5
//! paths = 200000
//! seed = 42
//! ```
//!
//! The preset, if any, is applied first; every other key overrides it no matter
//! where it appears. Later occurrences of a key win.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::euler::NegativeVarianceFix;
use crate::grid::TimeGrid;
use crate::model::{InitialCurve, Model, ModelParams};
use crate::presets::Preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Clp,
    Euler,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Clp => "clp",
            Scheme::Euler => "euler",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clp" | "c-lp" => Ok(Scheme::Clp),
            "euler" | "em" => Ok(Scheme::Euler),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Lifted,
    HestonLinear,
}

/// Model parameters before the `(omega, x)` vectors are expanded.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub lambda: f64,
    pub nu: f64,
    pub v0: f64,
    pub theta: f64,
    pub rho: f64,
    pub rate: f64,
    pub s0: f64,
    /// `None` means the one-factor `omega = 1, x = 0` configuration.
    pub hurst: Option<f64>,
    pub n_states: usize,
    pub curve: CurveKind,
}

impl ModelSpec {
    pub fn from_preset(preset: Preset) -> Result<Self> {
        let p = preset.params()?;
        Ok(Self {
            lambda: p.lambda,
            nu: p.nu,
            v0: p.v0,
            theta: p.theta,
            rho: p.rho,
            rate: p.rate,
            s0: p.s0,
            hurst: preset.hurst(),
            n_states: p.n_states(),
            curve: match preset.curve() {
                InitialCurve::HestonLinear => CurveKind::HestonLinear,
                _ => CurveKind::Lifted,
            },
        })
    }

    pub fn build(&self) -> Result<Model> {
        let mut params = match self.hurst {
            Some(h) => ModelParams::from_hurst(self.lambda, self.nu, self.v0, self.theta, self.rho, h, self.n_states)?,
            None => {
                if self.n_states != 1 {
                    return Err(Error::Config("without a Hurst index the model has exactly one factor".into()));
                }
                ModelParams::heston(self.lambda, self.nu, self.v0, self.theta, self.rho)?
            }
        };
        params.rate = self.rate;
        params.s0 = self.s0;
        let curve = match self.curve {
            CurveKind::Lifted => InitialCurve::LiftedDefault,
            CurveKind::HestonLinear => InitialCurve::HestonLinear,
        };
        Model::new(params, curve)
    }
}

/// Everything an experiment command needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Schemes to run, in order.
    pub schemes: Vec<Scheme>,
    pub horizon: f64,
    /// Step counts; used when `dts` is empty.
    pub steps: Vec<usize>,
    /// Maximum step sizes; each becomes the coarsest equidistant grid within it.
    pub dts: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub fix: NegativeVarianceFix,
    pub bench_steps: usize,
    pub bench_seed: u64,
    pub vix_maturity: f64,
    pub vix_window: f64,
    pub moneyness: Vec<f64>,
    pub sens_window: f64,
    pub sens_substeps: usize,
    pub sens_bump: f64,
    pub sens_bump_n: usize,
}

/// Offset separating the benchmark seed family from the scheme's.
pub const BENCH_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::from_preset(Preset::Set1).expect("preset is valid"),
            schemes: vec![Scheme::Clp],
            horizon: 5.0,
            steps: vec![10],
            dts: Vec::new(),
            n_paths: 10_000,
            seed: 42,
            out: PathBuf::from("out"),
            threads: None,
            fix: NegativeVarianceFix::FullTruncation,
            bench_steps: 1000,
            bench_seed: 42 ^ BENCH_SEED_OFFSET,
            vix_maturity: 1.0,
            vix_window: 1.0 / 12.0,
            moneyness: vec![0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3],
            sens_window: 0.5,
            sens_substeps: 1000,
            sens_bump: 0.001,
            sens_bump_n: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Splits config text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        pairs.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(pairs)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_pairs(&parse_pairs(&text)?)
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in pairs {
            map.insert(k.as_str(), v.as_str());
        }
        let mut cfg = Self::default();
        if let Some(name) = map.remove("preset") {
            cfg.model = ModelSpec::from_preset(name.parse()?)?;
        }
        let mut seed_given = false;
        let mut bench_seed_given = false;
        for (key, value) in map {
            match key {
                "lambda" => cfg.model.lambda = parse(key, value)?,
                "nu" => cfg.model.nu = parse(key, value)?,
                "v0" => cfg.model.v0 = parse(key, value)?,
                "theta" => cfg.model.theta = parse(key, value)?,
                "rho" => cfg.model.rho = parse(key, value)?,
                "rate" => cfg.model.rate = parse(key, value)?,
                "s0" => cfg.model.s0 = parse(key, value)?,
                "hurst" => {
                    cfg.model.hurst = match value.trim() {
                        "none" | "" => None,
                        v => Some(parse(key, v)?),
                    }
                }
                "n_states" => cfg.model.n_states = parse(key, value)?,
                "curve" => {
                    cfg.model.curve = match value.trim().to_ascii_lowercase().as_str() {
                        "lifted" => CurveKind::Lifted,
                        "heston" | "linear" => CurveKind::HestonLinear,
                        other => return Err(Error::Config(format!("unknown curve '{other}'"))),
                    }
                }
                "scheme" => {
                    cfg.schemes = match value.trim() {
                        "both" => vec![Scheme::Clp, Scheme::Euler],
                        v => parse_list(key, v)?,
                    }
                }
                "horizon" => cfg.horizon = parse(key, value)?,
                "steps" => cfg.steps = parse_list(key, value)?,
                "dt" => cfg.dts = parse_list(key, value)?,
                "paths" => cfg.n_paths = parse(key, value)?,
                "seed" => {
                    cfg.seed = parse(key, value)?;
                    seed_given = true;
                }
                "out" => cfg.out = PathBuf::from(value.trim()),
                "threads" => cfg.threads = Some(parse(key, value)?),
                "fix" => {
                    cfg.fix = match value.trim().to_ascii_lowercase().as_str() {
                        "full_truncation" | "truncation" => NegativeVarianceFix::FullTruncation,
                        "reflection" => NegativeVarianceFix::Reflection,
                        "absorption" => NegativeVarianceFix::Absorption,
                        other => return Err(Error::Config(format!("unknown fix '{other}'"))),
                    }
                }
                "bench_steps" => cfg.bench_steps = parse(key, value)?,
                "bench_seed" => {
                    cfg.bench_seed = parse(key, value)?;
                    bench_seed_given = true;
                }
                "vix_maturity" => cfg.vix_maturity = parse(key, value)?,
                "vix_window" => cfg.vix_window = parse(key, value)?,
                "moneyness" => cfg.moneyness = parse_list(key, value)?,
                "sens_window" => cfg.sens_window = parse(key, value)?,
                "sens_substeps" => cfg.sens_substeps = parse(key, value)?,
                "sens_bump" => cfg.sens_bump = parse(key, value)?,
                "sens_bump_n" => cfg.sens_bump_n = parse(key, value)?,
                other => return Err(Error::Config(format!("unknown key '{other}'"))),
            }
        }
        if seed_given && !bench_seed_given {
            cfg.bench_seed = cfg.seed ^ BENCH_SEED_OFFSET;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_paths == 0 {
            return bad("paths must be positive");
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required");
        }
        if self.steps.is_empty() && self.dts.is_empty() {
            return bad("either steps or dt must be given");
        }
        if self.steps.contains(&0) {
            return bad("step counts must be positive");
        }
        if self.dts.iter().any(|&d| !(d > 0.0)) {
            return bad("step sizes must be positive");
        }
        if !(self.horizon > 0.0) {
            return bad("horizon must be positive");
        }
        if self.bench_steps == 0 || self.sens_substeps == 0 {
            return bad("benchmark and sensitivity substeps must be positive");
        }
        if !(self.vix_window > 0.0) || !(self.vix_maturity >= 0.0) {
            return bad("VIX maturity must be >= 0 and window > 0");
        }
        if self.moneyness.iter().any(|m| !(*m > 0.0)) {
            return bad("moneyness values must be positive");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        self.model.build().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        self.model.build()
    }

    /// Grids on `[t0, horizon]`: one per entry of `dt` if given, else one per step count.
    pub fn grids(&self, t0: f64) -> Result<Vec<TimeGrid>> {
        if self.dts.is_empty() {
            self.steps.iter().map(|&n| TimeGrid::uniform(t0, self.horizon, n)).collect()
        } else {
            self.dts.iter().map(|&dt| TimeGrid::equidistant(t0, self.horizon, dt)).collect()
        }
    }
}
