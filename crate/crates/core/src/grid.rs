use crate::error::{domain, Result};

/// Strictly increasing simulation time grid `t_0 < t_1 < ... < t_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return domain("time grid needs at least two points");
        }
        if times.iter().any(|t| !t.is_finite()) {
            return domain("time grid contains non-finite values");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("time grid must be strictly increasing");
        }
        Ok(Self { times })
    }

    /// `n_steps` equidistant steps on `[t0, t_end]`.
    pub fn uniform(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return domain("number of steps must be positive");
        }
        if !(t_end > t0) {
            return domain(format!("horizon end {t_end} must exceed start {t0}"));
        }
        let dt = (t_end - t0) / n_steps as f64;
        let mut times: Vec<f64> = (0..n_steps).map(|k| t0 + k as f64 * dt).collect();
        times.push(t_end);
        Self::new(times)
    }

    /// Steps of size `dt` from `t0`; the last step is shortened so the grid ends
    /// exactly at `t_end`.
    pub fn with_step(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return domain(format!("step size {dt} must be positive"));
        }
        if !(t_end > t0) {
            return domain(format!("horizon end {t_end} must exceed start {t0}"));
        }
        let span = t_end - t0;
        // tolerate round-off so that e.g. T = 5, dt = 0.5 gives exactly 10 steps
        let full = (span / dt * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (0..=full).map(|k| t0 + k as f64 * dt).collect();
        let last = *times.last().expect("non-empty");
        if (t_end - last).abs() <= 1e-10 * span.max(1.0) {
            *times.last_mut().expect("non-empty") = t_end;
        } else if last < t_end {
            times.push(t_end);
        } else {
            times.pop();
            times.push(t_end);
        }
        Self::new(times)
    }

    /// The coarsest equidistant grid on `[t0, t_end]` whose step does not exceed `max_dt`.
    pub fn equidistant(t0: f64, t_end: f64, max_dt: f64) -> Result<Self> {
        if !(max_dt > 0.0) || !max_dt.is_finite() {
            return domain(format!("step size {max_dt} must be positive"));
        }
        let n = ((t_end - t0) / max_dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::uniform(t0, t_end, n)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("grid is non-empty")
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step(&self, i: usize) -> (f64, f64) {
        (self.times[i], self.times[i + 1])
    }

    /// Index of the grid point equal to `t` (within round-off), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-10 * self.end().abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    pub fn is_uniform(&self) -> bool {
        let dt = self.times[1] - self.times[0];
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * dt.abs().max(1.0))
    }
}
