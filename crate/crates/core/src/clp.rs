//! Constrained linear projection scheme.
//!
//! Each step samples the integrated variance `X` over `[t_i, t_{i+1}]` from
//! `IG(alpha, (alpha / beta)^2)`, where `X = alpha + beta Z` is the
//! least-squares line between `X` and the diffusion term `Z`. The slope is
//! constrained when needed so that the updated variance stays nonnegative for
//! every possible draw.

use nalgebra::DVector;

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::model::Model;
use crate::numerics::{precompute_grid, DriftMatrix, StepPrecompute};
use crate::sampling::{sample_inverse_gaussian, IgParams, RngStream};
use crate::sim::{run_paths, Diagnostics, PathOutcome, RunSpec, SimOutput};

pub use crate::sim::PathState;

/// Absolute tolerance on the constraint and the variance after an update.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Projection coefficients of one path over one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCoeffs {
    /// `E[X]`.
    pub alpha: f64,
    /// Unconstrained slope `E[XZ] / E[Z^2]`.
    pub beta: f64,
    /// Slope actually used.
    pub beta_c: f64,
    /// Largest slope for which the variance constraint is monotone in `X`
    /// (infinite when it always is).
    pub beta_l: f64,
    /// `E[X^n]`.
    pub alpha_n: DVector<f64>,
    /// `E[X^n Z] / E[X Z]`; sums to one against `omega`.
    pub ratio_n: DVector<f64>,
    /// Updated variance at `X = alpha`, `Z = 0` before the diffusion term,
    /// i.e. `C(0, beta) = c - nu omega_bar alpha / beta`.
    pub c: f64,
    pub constrained: bool,
    /// `E[XZ] <= 0` forced `ratio_n = 1 / omega_bar`.
    pub ratio_fallback: bool,
}

/// `(alpha, beta)` and the state ratios from the conditional moments; two
/// matrix-vector products per call.
pub fn step_coefficients(state: &PathState, pre: &StepPrecompute, model: &Model) -> Result<ProjectionCoeffs> {
    let p = &model.params;
    let m = &pre.matrices;
    let alpha_n = &m.phi1 * &state.u + &pre.xi;
    let alpha = dot(&p.omega, alpha_n.as_slice()) + pre.g0_int;
    if !(alpha > 0.0) {
        return Err(Error::Invariant(format!(
            "conditional mean of the integrated variance is {alpha} on [{}, {}]; state {}",
            pre.t_start,
            pre.t_end,
            dump(state)
        )));
    }
    let kappa = &m.chi_map * &state.u + &pre.psi;
    let cov = dot(&p.omega, kappa.as_slice());
    let omega_bar = p.omega_sum();
    let (ratio_n, ratio_fallback) = if cov > 0.0 {
        (kappa / cov, false)
    } else {
        (DVector::from_element(p.n_states(), 1.0 / omega_bar), true)
    };
    let beta = cov / alpha;

    let weighted_speed: f64 = (0..p.n_states()).map(|n| p.omega[n] * p.x[n] * ratio_n[n]).sum();
    let denom = weighted_speed + p.lambda * omega_bar;
    let beta_l = if denom > 0.0 { p.nu * omega_bar / denom } else { f64::INFINITY };

    let drift_at_zero: f64 = (0..p.n_states())
        .map(|n| p.omega[n] * p.x[n] * (alpha_n[n] - ratio_n[n] * alpha))
        .sum();
    let c = dot(&p.omega, state.u.as_slice()) - drift_at_zero + pre.g0_next;
    Ok(ProjectionCoeffs {
        alpha,
        beta,
        beta_c: beta,
        beta_l,
        alpha_n,
        ratio_n,
        c,
        constrained: false,
        ratio_fallback,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `C(0, beta)`: the updated variance at the smallest possible draw `X = 0`.
pub fn constraint_value(coeffs: &ProjectionCoeffs, beta: f64, model: &Model) -> f64 {
    coeffs.c - model.params.nu * model.params.omega_sum() * coeffs.alpha / beta
}

/// `dC(x, beta)/dx`, constant in `x`.
pub fn constraint_slope(coeffs: &ProjectionCoeffs, beta: f64, model: &Model) -> f64 {
    let p = &model.params;
    let omega_bar = p.omega_sum();
    let weighted_speed: f64 = (0..p.n_states()).map(|n| p.omega[n] * p.x[n] * coeffs.ratio_n[n]).sum();
    p.nu * omega_bar / beta - weighted_speed - p.lambda * omega_bar
}

/// Keeps `beta` if it is feasible (`0 < beta <= beta^L`, `C(0, beta) >= 0`),
/// otherwise moves to the boundary `C(0, beta^C) = 0`.
pub fn constrain_beta(mut coeffs: ProjectionCoeffs, state: &PathState, model: &Model) -> Result<ProjectionCoeffs> {
    let feasible = coeffs.beta > 0.0
        && coeffs.beta <= coeffs.beta_l
        && constraint_value(&coeffs, coeffs.beta, model) >= 0.0;
    if feasible {
        coeffs.beta_c = coeffs.beta;
        coeffs.constrained = false;
        return Ok(coeffs);
    }
    if !(coeffs.c > 0.0) {
        return Err(Error::Invariant(format!(
            "no feasible slope: c = {} (alpha = {}, beta = {}, beta_L = {}); state {}",
            coeffs.c,
            coeffs.alpha,
            coeffs.beta,
            coeffs.beta_l,
            dump(state)
        )));
    }
    let p = &model.params;
    let beta_c = p.nu * coeffs.alpha * p.omega_sum() / coeffs.c;
    if beta_c > coeffs.beta_l * (1.0 + 1e-12) {
        return Err(Error::Invariant(format!(
            "constrained slope {beta_c} exceeds its bound {}; state {}",
            coeffs.beta_l,
            dump(state)
        )));
    }
    coeffs.beta_c = beta_c;
    coeffs.constrained = true;
    Ok(coeffs)
}

fn dump(state: &PathState) -> String {
    format!(
        "t_index = {}, v = {}, log_s = {}, x_cum = {}, u = {:?}",
        state.t_index,
        state.v,
        state.log_s,
        state.x_cum,
        state.u.as_slice()
    )
}

/// Advances `state` by one step and returns the coefficients used.
pub fn clp_step(
    state: &mut PathState,
    pre: &StepPrecompute,
    model: &Model,
    stream: &mut RngStream,
) -> Result<ProjectionCoeffs> {
    let coeffs = constrain_beta(step_coefficients(state, pre, model)?, state, model)?;
    let ig = IgParams::new(coeffs.alpha, (coeffs.alpha / coeffs.beta_c).powi(2))?;
    let x = sample_inverse_gaussian(stream, ig);
    let normal = stream.normal();
    apply_draw(state, pre, model, &coeffs, x, normal)?;
    Ok(coeffs)
}

/// State update for a given integrated-variance draw `x` and price normal.
pub fn apply_draw(
    state: &mut PathState,
    pre: &StepPrecompute,
    model: &Model,
    coeffs: &ProjectionCoeffs,
    x: f64,
    normal: f64,
) -> Result<()> {
    let p = &model.params;
    let dx = x - coeffs.alpha;
    let z = dx / coeffs.beta_c;
    let common = -p.lambda * x + p.nu * z;
    let mut weighted = 0.0;
    for n in 0..p.n_states() {
        let x_n = coeffs.alpha_n[n] + coeffs.ratio_n[n] * dx;
        state.u[n] += common - p.x[n] * x_n;
        weighted += p.omega[n] * state.u[n];
    }
    state.v = weighted + pre.g0_next;
    if state.v < -CONSTRAINT_TOL {
        return Err(Error::Invariant(format!(
            "variance {} after step to t = {} with X = {x}, beta_C = {}; state {}",
            state.v,
            pre.t_end,
            coeffs.beta_c,
            dump(state)
        )));
    }
    state.log_s += p.rate * pre.dt - 0.5 * x + p.rho * z + ((1.0 - p.rho * p.rho) * x).sqrt() * normal;
    state.x_cum += x;
    state.z_cum += z;
    state.t_index += 1;
    Ok(())
}

/// Precomputed C-LP simulator for a model on a fixed grid.
#[derive(Debug, Clone)]
pub struct ClpSimulator {
    pub model: Model,
    pub drift: DriftMatrix,
    pub grid: TimeGrid,
    pub steps: Vec<StepPrecompute>,
}

impl ClpSimulator {
    pub fn new(model: &Model, grid: &TimeGrid) -> Result<Self> {
        if grid.start() < model.params.t0 - 1e-12 * model.params.t0.abs().max(1.0) {
            return domain("grid must not start before t0");
        }
        let drift = DriftMatrix::new(&model.params);
        let steps = precompute_grid(model, &drift, grid)?;
        Ok(Self {
            model: model.clone(),
            drift,
            grid: grid.clone(),
            steps,
        })
    }

    pub fn initial_state(&self) -> PathState {
        let p = &self.model.params;
        PathState::initial(p.s0.ln(), p.n_states(), p.v0)
    }

    /// Runs one path from `start` (a state at the first grid point) with its
    /// own stream.
    pub fn simulate_path(
        &self,
        start: &PathState,
        seed: u64,
        path_id: u64,
        snapshot_index: Option<usize>,
        mut step_sums: Option<&mut [f64]>,
    ) -> Result<PathOutcome> {
        let mut stream = RngStream::new(seed, path_id);
        let mut state = start.clone();
        let mut diag = Diagnostics {
            min_variance: state.v,
            ..Diagnostics::default()
        };
        let mut snapshot = None;
        if let Some(sums) = step_sums.as_deref_mut() {
            sums[0] += state.v;
        }
        for (i, pre) in self.steps.iter().enumerate() {
            if snapshot_index == Some(i) {
                snapshot = Some(state.clone());
            }
            let coeffs = clp_step(&mut state, pre, &self.model, &mut stream)?;
            diag.steps += 1;
            diag.constrained_steps += coeffs.constrained as u64;
            diag.ratio_fallbacks += coeffs.ratio_fallback as u64;
            diag.min_constraint = diag.min_constraint.min(constraint_value(&coeffs, coeffs.beta_c, &self.model));
            diag.min_slope_slack = diag.min_slope_slack.min(coeffs.beta_l - coeffs.beta_c);
            diag.min_variance = diag.min_variance.min(state.v);
            if let Some(sums) = step_sums.as_deref_mut() {
                sums[i + 1] += state.v;
            }
        }
        if snapshot_index == Some(self.steps.len()) {
            snapshot = Some(state.clone());
        }
        Ok(PathOutcome {
            terminal: state,
            snapshot,
            diagnostics: diag,
        })
    }

    /// Simulates from the model's initial state; the grid must start at `t0`.
    pub fn simulate(&self, spec: &RunSpec) -> Result<SimOutput> {
        let t0 = self.model.params.t0;
        if (self.grid.start() - t0).abs() > 1e-12 * t0.abs().max(1.0) {
            return domain("simulation from the initial state needs a grid starting at t0");
        }
        self.simulate_from(&self.initial_state(), spec)
    }

    /// Simulates every path from the same state at the first grid point.
    pub fn simulate_from(&self, start: &PathState, spec: &RunSpec) -> Result<SimOutput> {
        if start.u.len() != self.model.n_states() {
            return domain("start state has the wrong number of factors");
        }
        if spec.n_paths == 0 {
            return domain("number of paths must be positive");
        }
        if let Some(k) = spec.snapshot_index {
            if k > self.grid.n_steps() {
                return domain(format!("snapshot index {k} beyond the grid"));
            }
        }
        run_paths(spec, self.grid.times(), |id, sums| {
            self.simulate_path(start, spec.seed, id, spec.snapshot_index, sums)
        })
    }
}

/// Convenience wrapper: precompute and simulate `n_paths` paths.
pub fn simulate_clp(model: &Model, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<SimOutput> {
    ClpSimulator::new(model, grid)?.simulate(&RunSpec::new(n_paths, seed))
}
