//! Euler–Maruyama baseline for the lifted Heston model.

use crate::error::{domain, Result};
use crate::grid::TimeGrid;
use crate::model::Model;
use crate::sampling::{correlated_pair, RngStream};
use crate::sim::{run_paths, Diagnostics, PathOutcome, PathState, RunSpec, SimOutput};

/// Treatment of a negative variance inside the drift and diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeVarianceFix {
    /// Use `max(V, 0)`; the state keeps its sign.
    #[default]
    FullTruncation,
    /// Use `|V|`.
    Reflection,
    /// Shift the state so that `V = 0` whenever it turns negative.
    Absorption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EulerConfig {
    pub fix: NegativeVarianceFix,
    /// Each step's Brownian increment is the sum of this many fine draws, so a
    /// grid refined by the same factor sees identical Brownian paths.
    pub noise_substeps: usize,
}

impl Default for EulerConfig {
    fn default() -> Self {
        Self {
            fix: NegativeVarianceFix::FullTruncation,
            noise_substeps: 1,
        }
    }
}

impl EulerConfig {
    fn effective(&self, v: f64) -> f64 {
        match self.fix {
            NegativeVarianceFix::FullTruncation | NegativeVarianceFix::Absorption => v.max(0.0),
            NegativeVarianceFix::Reflection => v.abs(),
        }
    }
}

/// One Euler step over `dt` with Brownian increments `(dw1, dw2)`; `g0_next`
/// is `g0(t + dt)`.
pub fn euler_step_with_increments(
    state: &mut PathState,
    model: &Model,
    dt: f64,
    g0_next: f64,
    dw1: f64,
    dw2: f64,
    config: &EulerConfig,
) {
    let p = &model.params;
    let vp = config.effective(state.v);
    let sq = vp.sqrt();
    let shock = -p.lambda * vp * dt + p.nu * sq * dw2;
    let mut weighted = 0.0;
    for ((u, &x), &w) in state.u.iter_mut().zip(&p.x).zip(&p.omega) {
        *u += shock - x * *u * dt;
        weighted += w * *u;
    }
    let mut v_next = weighted + g0_next;
    if config.fix == NegativeVarianceFix::Absorption && v_next < 0.0 {
        let lift = -v_next / p.omega_sum();
        state.u.add_scalar_mut(lift);
        v_next = 0.0;
    }
    state.log_s += (p.rate - 0.5 * vp) * dt + sq * dw1;
    state.x_cum += 0.5 * dt * (vp + config.effective(v_next));
    state.z_cum += sq * dw2;
    state.v = v_next;
    state.t_index += 1;
}

/// One Euler step drawing its own correlated increments.
pub fn euler_step(
    state: &mut PathState,
    model: &Model,
    t: f64,
    dt: f64,
    stream: &mut RngStream,
    config: &EulerConfig,
) -> Result<()> {
    let (dw1, dw2) = draw_increments(stream, model.params.rho, dt, config.noise_substeps)?;
    let g0_next = model.g0(t + dt)?;
    euler_step_with_increments(state, model, dt, g0_next, dw1, dw2, config);
    Ok(())
}

fn draw_increments(stream: &mut RngStream, rho: f64, dt: f64, substeps: usize) -> Result<(f64, f64)> {
    let k = substeps.max(1);
    let scale = (dt / k as f64).sqrt();
    let (mut a, mut b) = (0.0, 0.0);
    for _ in 0..k {
        let (z1, z2) = correlated_pair(stream, rho)?;
        a += z1;
        b += z2;
    }
    Ok((a * scale, b * scale))
}

/// Euler simulator with the initial curve tabulated on the grid.
#[derive(Debug, Clone)]
pub struct EulerSimulator {
    pub model: Model,
    pub grid: TimeGrid,
    pub config: EulerConfig,
    g0_grid: Vec<f64>,
}

impl EulerSimulator {
    pub fn new(model: &Model, grid: &TimeGrid, config: EulerConfig) -> Result<Self> {
        let g0_grid = grid.times().iter().map(|&t| model.g0(t)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model: model.clone(),
            grid: grid.clone(),
            config,
            g0_grid,
        })
    }

    pub fn initial_state(&self) -> PathState {
        let p = &self.model.params;
        PathState::initial(p.s0.ln(), p.n_states(), p.v0)
    }

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
        let rho = self.model.params.rho;
        for i in 0..self.grid.n_steps() {
            if snapshot_index == Some(i) {
                snapshot = Some(state.clone());
            }
            let (t, t_next) = self.grid.step(i);
            let dt = t_next - t;
            let (dw1, dw2) = draw_increments(&mut stream, rho, dt, self.config.noise_substeps)?;
            euler_step_with_increments(&mut state, &self.model, dt, self.g0_grid[i + 1], dw1, dw2, &self.config);
            diag.steps += 1;
            diag.min_variance = diag.min_variance.min(state.v);
            diag.negative_variance_steps += (state.v < 0.0) as u64;
            if let Some(sums) = step_sums.as_deref_mut() {
                sums[i + 1] += state.v;
            }
        }
        if snapshot_index == Some(self.grid.n_steps()) {
            snapshot = Some(state.clone());
        }
        diag.paths_with_negative_variance = (diag.negative_variance_steps > 0) as u64;
        Ok(PathOutcome {
            terminal: state,
            snapshot,
            diagnostics: diag,
        })
    }

    pub fn simulate(&self, spec: &RunSpec) -> Result<SimOutput> {
        let t0 = self.model.params.t0;
        if (self.grid.start() - t0).abs() > 1e-12 * t0.abs().max(1.0) {
            return domain("simulation from the initial state needs a grid starting at t0");
        }
        self.simulate_from(&self.initial_state(), spec)
    }

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

pub fn simulate_euler(
    model: &Model,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    config: EulerConfig,
) -> Result<SimOutput> {
    EulerSimulator::new(model, grid, config)?.simulate(&RunSpec::new(n_paths, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::presets::Preset;

    #[test]
    fn no_noise_no_reversion_keeps_curve() {
        let mut p = ModelParams::from_hurst(0.0, 0.3, 0.04, 0.1, 0.5, 0.3, 3).unwrap();
        p.nu = 1e-300;
        let model = Model::lifted(p).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let out = simulate_euler(&model, &grid, 4, 1, EulerConfig::default()).unwrap();
        for v in &out.v_t {
            assert!((v - 0.04).abs() < 1e-15);
        }
        for x in &out.x_t {
            assert!((x - 0.04).abs() < 1e-15);
        }
    }

    #[test]
    fn absorption_lifts_state_to_zero() {
        let model = Preset::Extreme.model().unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let cfg = EulerConfig {
            fix: NegativeVarianceFix::Absorption,
            noise_substeps: 1,
        };
        let out = simulate_euler(&model, &grid, 2000, 3, cfg).unwrap();
        assert!(out.v_t.iter().all(|v| *v >= 0.0));
        assert_eq!(out.diagnostics.negative_variance_steps, 0);
    }

    #[test]
    fn aggregated_noise_matches_fine_grid_sums() {
        let model = Preset::Set1.model().unwrap();
        let cfg = EulerConfig {
            noise_substeps: 4,
            ..EulerConfig::default()
        };
        let mut a = RngStream::new(5, 9);
        let mut b = RngStream::new(5, 9);
        let (c1, c2) = draw_increments(&mut a, model.params.rho, 0.2, cfg.noise_substeps).unwrap();
        let (mut f1, mut f2) = (0.0, 0.0);
        for _ in 0..4 {
            let (d1, d2) = draw_increments(&mut b, model.params.rho, 0.05, 1).unwrap();
            f1 += d1;
            f2 += d2;
        }
        assert!((c1 - f1).abs() < 1e-14 && (c2 - f2).abs() < 1e-14);
    }
}
