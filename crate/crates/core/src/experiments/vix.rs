use std::path::PathBuf;

use super::{ensure_dir, run_scheme, write_csv, ExperimentConfig, Scheme};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::pricing::{smile, SmilePoint, VixEvaluator};
use crate::sim::RunSpec;
use crate::stats::Moments;

/// One smile row: a call on VIX_T struck at `moneyness * forward`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VixSmileRow {
    pub moneyness: f64,
    pub point: SmilePoint,
}

/// VIX options for one scheme and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct VixRun {
    pub scheme: Scheme,
    pub n_steps: usize,
    pub dt: f64,
    /// Monte Carlo mean of VIX_T, the Black-76 forward.
    pub forward: f64,
    pub se_forward: f64,
    pub smile: Vec<VixSmileRow>,
    /// Mean of `VIX_T^2 Theta - X_{T, T+Theta}` over paths, which should vanish.
    pub tower_diff: f64,
    pub se_tower_diff: f64,
    pub tower_mean_vix2: f64,
    pub tower_mean_continuation: f64,
    /// Paths whose conditional mean was negative and clamped to zero.
    pub clamped: usize,
    pub paths_with_negative_variance: u64,
}

impl VixRun {
    /// Euler runs where some variance path went negative.
    pub fn flagged(&self) -> bool {
        self.paths_with_negative_variance > 0 || self.clamped > 0
    }
}

/// Simulates to `T + Theta` on each configured step count (which must put `T` on
/// the grid) and prices calls on `VIX_T` for each scheme.
pub fn vix_study(cfg: &ExperimentConfig) -> Result<Vec<VixRun>> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let t0 = model.params.t0;
    let maturity = t0 + cfg.vix_maturity;
    let horizon = maturity + cfg.vix_window;
    let evaluator = VixEvaluator::new(&model, maturity, cfg.vix_window)?;
    let mut runs = Vec::new();
    for &scheme in &cfg.schemes {
        for &n_steps in &cfg.steps {
            let grid = TimeGrid::uniform(t0, horizon, n_steps)?;
            let k = grid.index_of(maturity).ok_or_else(|| {
                Error::Config(format!("{n_steps} steps on [{t0}, {horizon}] do not put the maturity {maturity} on the grid"))
            })?;
            let spec = RunSpec::new(cfg.n_paths, cfg.seed).with_snapshot(k);
            let out = run_scheme(scheme, &model, &grid, &spec, cfg.fix)?;
            let states = out.snapshot.as_ref().expect("snapshot requested");

            let mut vix = Vec::with_capacity(states.len());
            let mut diff = Vec::with_capacity(states.len());
            let mut vix2 = Vec::with_capacity(states.len());
            let mut cont = Vec::with_capacity(states.len());
            let mut clamped = 0;
            for (state, x_end) in states.iter().zip(&out.x_t) {
                let (v, was_clamped) = evaluator.evaluate(state);
                clamped += was_clamped as usize;
                vix.push(v);
                let lhs = v * v * cfg.vix_window;
                let rhs = x_end - state.x_cum;
                vix2.push(lhs);
                cont.push(rhs);
                diff.push(lhs - rhs);
            }
            let fwd = Moments::of(&vix)?;
            let strikes: Vec<f64> = cfg.moneyness.iter().map(|m| m * fwd.mean).collect();
            let (_, points) = smile(&vix, &strikes, cfg.vix_maturity, model.params.rate)?;
            let d = Moments::of(&diff)?;
            runs.push(VixRun {
                scheme,
                n_steps,
                dt: (horizon - t0) / n_steps as f64,
                forward: fwd.mean,
                se_forward: fwd.se_mean,
                smile: cfg
                    .moneyness
                    .iter()
                    .zip(points)
                    .map(|(&moneyness, point)| VixSmileRow { moneyness, point })
                    .collect(),
                tower_diff: d.mean,
                se_tower_diff: d.se_mean,
                tower_mean_vix2: crate::stats::mean(&vix2),
                tower_mean_continuation: crate::stats::mean(&cont),
                clamped,
                paths_with_negative_variance: out.diagnostics.paths_with_negative_variance,
            });
        }
    }
    Ok(runs)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `vix_<scheme>_<steps>.csv` smile tables and `vix_summary.csv`.
pub fn cmd_vix(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let runs = vix_study(cfg)?;
    ensure_dir(&cfg.out)?;
    let mut written = Vec::new();
    for run in &runs {
        let flag = run.flagged().to_string();
        let rows: Vec<Vec<String>> = run
            .smile
            .iter()
            .map(|r| {
                vec![
                    r.point.strike.to_string(),
                    r.moneyness.to_string(),
                    r.point.quote.price.to_string(),
                    r.point.quote.std_err.to_string(),
                    opt(r.point.quote.implied_vol),
                    opt(r.point.quote.implied_vol_se),
                    flag.clone(),
                ]
            })
            .collect();
        let path = cfg.out.join(format!("vix_{}_{}.csv", run.scheme, run.n_steps));
        write_csv(
            &path,
            &["strike", "moneyness", "price", "std_err", "implied_vol", "se_implied_vol", "negative_variance"],
            &rows,
        )?;
        written.push(path);
    }
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.scheme.to_string(),
                r.n_steps.to_string(),
                r.dt.to_string(),
                r.forward.to_string(),
                r.se_forward.to_string(),
                r.tower_diff.to_string(),
                r.se_tower_diff.to_string(),
                r.clamped.to_string(),
                r.paths_with_negative_variance.to_string(),
            ]
        })
        .collect();
    let path = cfg.out.join("vix_summary.csv");
    write_csv(
        &path,
        &[
            "scheme",
            "n_steps",
            "dt",
            "forward",
            "se_forward",
            "tower_diff",
            "se_tower_diff",
            "clamped",
            "paths_negative_variance",
        ],
        &rows,
    )?;
    written.push(path);
    Ok(written)
}
