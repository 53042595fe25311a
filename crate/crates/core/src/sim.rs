//! Path-parallel execution and simulation output shared by both schemes.

use nalgebra::DVector;

use crate::error::Result;
use crate::stats::Moments;

/// How paths are distributed over threads. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Requires the `parallel` feature; otherwise runs sequentially.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Number of paths simulated together and reduced as one unit. Fixed so the
/// reduction order never depends on the thread count.
pub const CHUNK: usize = 1024;

/// Path count, master seed and what to record.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub n_paths: usize,
    pub seed: u64,
    pub execution: Execution,
    /// Accumulate `E[V_t]` at every grid point.
    pub record_step_means: bool,
    /// Keep the full state of every path at this grid index.
    pub snapshot_index: Option<usize>,
}

impl RunSpec {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            execution: Execution::default(),
            record_step_means: false,
            snapshot_index: None,
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_step_means(mut self) -> Self {
        self.record_step_means = true;
        self
    }

    pub fn with_snapshot(mut self, index: usize) -> Self {
        self.snapshot_index = Some(index);
        self
    }
}

/// Per-path state: log price, state vector, variance and the running
/// integrals `X = int V dt`, `Z = int sqrt(V) dW2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub log_s: f64,
    pub u: DVector<f64>,
    /// Cached `omega . u + g0(t)`.
    pub v: f64,
    pub x_cum: f64,
    pub z_cum: f64,
    pub t_index: usize,
}

impl PathState {
    pub fn initial(log_s0: f64, n_states: usize, v0: f64) -> Self {
        Self {
            log_s: log_s0,
            u: DVector::zeros(n_states),
            v: v0,
            x_cum: 0.0,
            z_cum: 0.0,
            t_index: 0,
        }
    }
}

/// Counters accumulated over all paths and steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub steps: u64,
    /// Steps where the slope had to be constrained.
    pub constrained_steps: u64,
    /// Steps where the covariance `omega . kappa` was not positive and the
    /// state ratios fell back to `1 / omega_bar`.
    pub ratio_fallbacks: u64,
    /// Smallest `C(0, beta^C)` observed.
    pub min_constraint: f64,
    /// Smallest `beta^L - beta^C` observed.
    pub min_slope_slack: f64,
    /// Smallest variance observed on the grid.
    pub min_variance: f64,
    /// Grid values with negative variance (Euler only).
    pub negative_variance_steps: u64,
    pub paths_with_negative_variance: u64,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            steps: 0,
            constrained_steps: 0,
            ratio_fallbacks: 0,
            min_constraint: f64::INFINITY,
            min_slope_slack: f64::INFINITY,
            min_variance: f64::INFINITY,
            negative_variance_steps: 0,
            paths_with_negative_variance: 0,
        }
    }
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.steps += other.steps;
        self.constrained_steps += other.constrained_steps;
        self.ratio_fallbacks += other.ratio_fallbacks;
        self.min_constraint = self.min_constraint.min(other.min_constraint);
        self.min_slope_slack = self.min_slope_slack.min(other.min_slope_slack);
        self.min_variance = self.min_variance.min(other.min_variance);
        self.negative_variance_steps += other.negative_variance_steps;
        self.paths_with_negative_variance += other.paths_with_negative_variance;
    }
}

/// What a scheme returns for one path.
#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub terminal: PathState,
    pub snapshot: Option<PathState>,
    pub diagnostics: Diagnostics,
}

/// Terminal samples and summaries of a simulation run.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub times: Vec<f64>,
    pub s_t: Vec<f64>,
    pub v_t: Vec<f64>,
    pub x_t: Vec<f64>,
    pub z_t: Vec<f64>,
    /// Full states at the snapshot index, if requested.
    pub snapshot: Option<Vec<PathState>>,
    /// `E[V_t]` estimates on the grid, if requested.
    pub step_mean_v: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub quantity: &'static str,
    pub moments: Moments,
}

impl SimOutput {
    pub fn n_paths(&self) -> usize {
        self.x_t.len()
    }

    pub fn summary(&self) -> Result<Vec<SummaryRow>> {
        Ok(vec![
            SummaryRow { quantity: "S_T", moments: Moments::of(&self.s_t)? },
            SummaryRow { quantity: "V_T", moments: Moments::of(&self.v_t)? },
            SummaryRow { quantity: "X_T", moments: Moments::of(&self.x_t)? },
        ])
    }
}

struct ChunkResult {
    outcomes: Vec<PathOutcome>,
    step_sums: Vec<f64>,
}

/// Runs `path(id, step_sums)` for every path id and assembles the output.
/// `step_sums` is `Some` when step means are recorded; the path adds its
/// variance at each grid point.
pub(crate) fn run_paths<F>(spec: &RunSpec, times: &[f64], path: F) -> Result<SimOutput>
where
    F: Fn(u64, Option<&mut [f64]>) -> Result<PathOutcome> + Sync,
{
    let n_points = times.len();
    let n_chunks = spec.n_paths.div_ceil(CHUNK);
    let run_chunk = |c: usize| -> Result<ChunkResult> {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(spec.n_paths);
        let mut step_sums = if spec.record_step_means { vec![0.0; n_points] } else { Vec::new() };
        let mut outcomes = Vec::with_capacity(end - start);
        for id in start..end {
            let sums = spec.record_step_means.then_some(step_sums.as_mut_slice());
            outcomes.push(path(id as u64, sums)?);
        }
        Ok(ChunkResult { outcomes, step_sums })
    };
    let chunks: Vec<ChunkResult> = match spec.execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n_chunks).into_par_iter().map(run_chunk).collect::<Result<_>>()?
        }
        _ => (0..n_chunks).map(run_chunk).collect::<Result<_>>()?,
    };

    let n = spec.n_paths;
    let mut out = SimOutput {
        times: times.to_vec(),
        s_t: Vec::with_capacity(n),
        v_t: Vec::with_capacity(n),
        x_t: Vec::with_capacity(n),
        z_t: Vec::with_capacity(n),
        snapshot: spec.snapshot_index.map(|_| Vec::with_capacity(n)),
        step_mean_v: spec.record_step_means.then(|| vec![0.0; n_points]),
        diagnostics: Diagnostics::default(),
    };
    for chunk in chunks {
        if let Some(means) = out.step_mean_v.as_mut() {
            for (m, s) in means.iter_mut().zip(&chunk.step_sums) {
                *m += s;
            }
        }
        for o in chunk.outcomes {
            out.s_t.push(o.terminal.log_s.exp());
            out.v_t.push(o.terminal.v);
            out.x_t.push(o.terminal.x_cum);
            out.z_t.push(o.terminal.z_cum);
            if let (Some(snaps), Some(s)) = (out.snapshot.as_mut(), o.snapshot) {
                snaps.push(s);
            }
            out.diagnostics.merge(&o.diagnostics);
        }
    }
    if let Some(means) = out.step_mean_v.as_mut() {
        for m in means.iter_mut() {
            *m /= n as f64;
        }
    }
    Ok(out)
}

/// Runs `f` on a dedicated pool of `threads` workers (global pool when `None`).
/// Without the `parallel` feature the closure simply runs on the caller.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| crate::error::Error::Config(format!("thread pool: {e}")))?;
        return Ok(pool.install(f));
    }
    let _ = threads;
    Ok(f())
}
