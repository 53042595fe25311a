use std::path::PathBuf;

use super::{ensure_dir, run_scheme, write_csv, ExperimentConfig, Scheme};
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::sim::{RunSpec, SimOutput};
use crate::stats::{bootstrap_se, variance, Moments};

/// Errors above this (and non-finite ones) are clipped in the plot file.
pub const ERROR_CAP: f64 = 1e3;

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Moments of `X_T` for one scheme and grid, compared with the fine-Euler benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: String,
    pub n_steps: usize,
    pub dt: f64,
    pub mean: f64,
    pub se_mean: f64,
    pub variance: f64,
    pub se_variance: f64,
    /// Bootstrap standard error of the sample variance.
    pub se_variance_boot: f64,
    /// `|E[X_T] - benchmark|`, infinite when the run produced non-finite samples.
    pub mean_error: f64,
    pub var_error: f64,
    /// Signed `(Var - benchmark) / benchmark`.
    pub var_rel_diff: f64,
    /// Combined standard errors of the two differences.
    pub se_mean_error: f64,
    pub se_var_error: f64,
    pub se_var_error_boot: f64,
    pub paths_with_negative_variance: u64,
}

struct Stats {
    m: Moments,
    se_boot: f64,
}

fn stats_of(out: &SimOutput, seed: u64) -> Result<Stats> {
    Ok(Stats {
        m: Moments::of(&out.x_t)?,
        se_boot: bootstrap_se(&out.x_t, variance, BOOTSTRAP_RESAMPLES, seed),
    })
}

fn abs_error(a: f64, b: f64) -> f64 {
    let e = (a - b).abs();
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

fn row(scheme: &str, grid: &TimeGrid, out: &SimOutput, s: &Stats, bench: &Stats) -> ConvergenceRow {
    let (m, b) = (&s.m, &bench.m);
    let combine = |x: f64, y: f64| x.hypot(y);
    ConvergenceRow {
        scheme: scheme.to_string(),
        n_steps: grid.n_steps(),
        dt: (grid.end() - grid.start()) / grid.n_steps() as f64,
        mean: m.mean,
        se_mean: m.se_mean,
        variance: m.variance,
        se_variance: m.se_variance,
        se_variance_boot: s.se_boot,
        mean_error: abs_error(m.mean, b.mean),
        var_error: abs_error(m.variance, b.variance),
        var_rel_diff: (m.variance - b.variance) / b.variance,
        se_mean_error: combine(m.se_mean, b.se_mean),
        se_var_error: combine(m.se_variance, b.se_variance),
        se_var_error_boot: combine(s.se_boot, bench.se_boot),
        paths_with_negative_variance: out.diagnostics.paths_with_negative_variance,
    }
}

/// Runs the benchmark and every configured scheme on every configured grid.
/// The first row is the benchmark itself, compared with itself.
pub fn convergence_table(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let t0 = model.params.t0;
    let bench_grid = TimeGrid::uniform(t0, cfg.horizon, cfg.bench_steps)?;
    let bench_out = run_scheme(
        Scheme::Euler,
        &model,
        &bench_grid,
        &RunSpec::new(cfg.n_paths, cfg.bench_seed),
        cfg.fix,
    )?;
    let bench = stats_of(&bench_out, cfg.bench_seed)?;
    let mut rows = vec![row("benchmark", &bench_grid, &bench_out, &bench, &bench)];
    let spec = RunSpec::new(cfg.n_paths, cfg.seed);
    for &scheme in &cfg.schemes {
        for grid in cfg.grids(t0)? {
            let out = run_scheme(scheme, &model, &grid, &spec, cfg.fix)?;
            let s = stats_of(&out, cfg.seed)?;
            rows.push(row(scheme.name(), &grid, &out, &s, &bench));
        }
    }
    Ok(rows)
}

fn capped(e: f64) -> f64 {
    if e.is_finite() {
        e.min(ERROR_CAP)
    } else {
        ERROR_CAP
    }
}

/// Writes `convergence.csv` (full table) and `convergence_plot.csv` (errors capped at 1e3).
pub fn cmd_converge(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let rows = convergence_table(cfg)?;
    ensure_dir(&cfg.out)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.scheme.clone(),
                r.n_steps.to_string(),
                r.dt.to_string(),
                r.mean.to_string(),
                r.se_mean.to_string(),
                r.variance.to_string(),
                r.se_variance.to_string(),
                r.se_variance_boot.to_string(),
                r.mean_error.to_string(),
                r.se_mean_error.to_string(),
                r.var_error.to_string(),
                r.se_var_error.to_string(),
                r.se_var_error_boot.to_string(),
                r.var_rel_diff.to_string(),
                r.paths_with_negative_variance.to_string(),
            ]
        })
        .collect();
    let full = cfg.out.join("convergence.csv");
    write_csv(
        &full,
        &[
            "scheme",
            "n_steps",
            "dt",
            "mean",
            "se_mean",
            "variance",
            "se_variance",
            "se_variance_boot",
            "mean_error",
            "se_mean_error",
            "var_error",
            "se_var_error",
            "se_var_error_boot",
            "var_rel_diff",
            "paths_negative_variance",
        ],
        &table,
    )?;
    let plot: Vec<Vec<String>> = rows
        .iter()
        .skip(1)
        .map(|r| {
            vec![
                r.scheme.clone(),
                r.dt.to_string(),
                capped(r.mean_error).to_string(),
                capped(r.se_mean_error).to_string(),
                capped(r.var_error).to_string(),
                capped(r.se_var_error).to_string(),
            ]
        })
        .collect();
    let plot_path = cfg.out.join("convergence_plot.csv");
    write_csv(
        &plot_path,
        &["scheme", "dt", "mean_error", "se_mean_error", "var_error", "se_var_error"],
        &plot,
    )?;
    Ok(vec![full, plot_path])
}
