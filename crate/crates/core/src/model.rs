//! Lifted Heston parameters, the initial variance curve and the mean oracles.
//!
//! The model is
//!
//! ```text
//! dS_t / S_t = r dt + sqrt(V_t) dW1_t
//! V_t        = g0(t) + sum_n omega_n U^n_t
//! dU^n_t     = (-x_n U^n_t - lambda V_t) dt + nu sqrt(V_t) dW2_t,   U_{t0} = 0
//! ```
//!
//! with `d<W1, W2>_t = rho dt`. The classical Heston model is recovered with
//! `N = 1`, `omega = 1`, `x = 0` and a linear curve `g0(t) = V0 + lambda theta (t - t0)`.

use statrs::function::gamma::gamma;

use crate::error::{domain, Result};
use crate::numerics::{phi1_scalar, phi2_scalar};

/// Lifted Heston parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Mean-reversion speed `lambda >= 0`.
    pub lambda: f64,
    /// Vol-of-vol `nu > 0`.
    pub nu: f64,
    /// Initial variance `V0 >= 0`.
    pub v0: f64,
    /// Long-term variance level `theta >= 0`.
    pub theta: f64,
    /// Spot/variance correlation.
    pub rho: f64,
    /// Risk-free rate.
    pub rate: f64,
    /// State weights, all `>= 0` with at least one positive entry.
    pub omega: Vec<f64>,
    /// State mean-reversion speeds, all `>= 0`.
    pub x: Vec<f64>,
    pub s0: f64,
    pub t0: f64,
}

impl ModelParams {
    /// Parameter set with `(omega, x)` from the Hurst parametrization.
    #[allow(clippy::too_many_arguments)]
    pub fn from_hurst(
        lambda: f64,
        nu: f64,
        v0: f64,
        theta: f64,
        rho: f64,
        hurst: f64,
        n_states: usize,
    ) -> Result<Self> {
        let (omega, x) = hurst_parametrization(n_states, hurst)?;
        let params = Self {
            lambda,
            nu,
            v0,
            theta,
            rho,
            rate: 0.0,
            omega,
            x,
            s0: 1.0,
            t0: 0.0,
        };
        params.validate()?;
        Ok(params)
    }

    /// One-factor configuration that collapses to the classical Heston model.
    pub fn heston(lambda: f64, nu: f64, v0: f64, theta: f64, rho: f64) -> Result<Self> {
        let params = Self {
            lambda,
            nu,
            v0,
            theta,
            rho,
            rate: 0.0,
            omega: vec![1.0],
            x: vec![0.0],
            s0: 1.0,
            t0: 0.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn n_states(&self) -> usize {
        self.omega.len()
    }

    /// `sum_n omega_n`.
    pub fn omega_sum(&self) -> f64 {
        self.omega.iter().sum()
    }

    pub fn is_heston_collapse(&self) -> bool {
        self.omega.len() == 1 && self.omega[0] == 1.0 && self.x[0] == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.omega.len();
        if n == 0 {
            return domain("at least one state process is required");
        }
        if self.x.len() != n {
            return domain(format!(
                "omega has {n} entries but x has {}",
                self.x.len()
            ));
        }
        let scalars = [
            ("lambda", self.lambda),
            ("nu", self.nu),
            ("v0", self.v0),
            ("theta", self.theta),
            ("rho", self.rho),
            ("rate", self.rate),
            ("s0", self.s0),
            ("t0", self.t0),
        ];
        for (name, value) in scalars {
            if !value.is_finite() {
                return domain(format!("{name} must be finite, got {value}"));
            }
        }
        if self.lambda < 0.0 {
            return domain(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.nu > 0.0) {
            return domain(format!("nu must be > 0, got {}", self.nu));
        }
        if self.v0 < 0.0 {
            return domain(format!("v0 must be >= 0, got {}", self.v0));
        }
        if self.theta < 0.0 {
            return domain(format!("theta must be >= 0, got {}", self.theta));
        }
        if self.rho * self.rho > 1.0 {
            return domain(format!("rho must lie in [-1, 1], got {}", self.rho));
        }
        if !(self.s0 > 0.0) {
            return domain(format!("s0 must be > 0, got {}", self.s0));
        }
        if self
            .omega
            .iter()
            .chain(self.x.iter())
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return domain("omega and x entries must be finite and >= 0");
        }
        if !self.omega.iter().any(|&w| w > 0.0) {
            return domain("at least one omega entry must be positive");
        }
        Ok(())
    }
}

/// Shape of the deterministic initial variance curve `g0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCurve {
    /// `g0(t) = V0 + lambda theta sum_n omega_n / x_n (1 - exp(-x_n (t - t0)))`,
    /// with the `x_n -> 0` limit `lambda theta omega_n (t - t0)`.
    LiftedDefault,
    /// `g0(t) = V0 + lambda theta (t - t0)`.
    HestonLinear,
    /// Piecewise-linear interpolation of tabulated values, flat beyond the last node.
    Custom(TabulatedCurve),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return domain("tabulated curve needs matching, non-empty time and value vectors");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("tabulated curve times must be strictly increasing");
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return domain("tabulated curve values must be finite and >= 0");
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn value(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    fn slope(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n < 2 || t < self.times[0] || t >= self.times[n - 1] {
            return 0.0;
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        (self.values[k + 1] - self.values[k]) / (self.times[k + 1] - self.times[k])
    }

    /// Exact integral of the interpolant on `[a, b]`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        // breakpoints inside (a, b) split the integral into linear pieces
        let mut knots = vec![a];
        knots.extend(self.times.iter().copied().filter(|&s| s > a && s < b));
        knots.push(b);
        knots
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.value(w[0]) + self.value(w[1])))
            .sum()
    }
}

/// Parameters together with the chosen initial variance curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub curve: InitialCurve,
}

impl Model {
    pub fn new(params: ModelParams, curve: InitialCurve) -> Result<Self> {
        params.validate()?;
        if let InitialCurve::Custom(tab) = &curve {
            if (tab.times[0] - params.t0).abs() > 1e-12 {
                return domain("tabulated curve must start at t0");
            }
            if (tab.values[0] - params.v0).abs() > 1e-12 * params.v0.max(1.0) {
                return domain("tabulated curve must satisfy g0(t0) = v0");
            }
        }
        Ok(Self { params, curve })
    }

    /// Lifted model with the default curve.
    pub fn lifted(params: ModelParams) -> Result<Self> {
        Self::new(params, InitialCurve::LiftedDefault)
    }

    pub fn n_states(&self) -> usize {
        self.params.n_states()
    }

    /// Initial variance curve `g0(t)`.
    pub fn g0(&self, t: f64) -> Result<f64> {
        let tau = t - self.params.t0;
        if tau < -1e-14 * self.params.t0.abs().max(1.0) {
            return domain(format!("g0 evaluated before t0: t = {t}"));
        }
        Ok(self.g0_unchecked(tau.max(0.0)))
    }

    fn g0_unchecked(&self, tau: f64) -> f64 {
        let p = &self.params;
        match &self.curve {
            InitialCurve::LiftedDefault => {
                let sum: f64 = p
                    .omega
                    .iter()
                    .zip(&p.x)
                    .map(|(&w, &x)| w * tau * phi1_scalar(-x * tau))
                    .sum();
                p.v0 + p.lambda * p.theta * sum
            }
            InitialCurve::HestonLinear => p.v0 + p.lambda * p.theta * tau,
            InitialCurve::Custom(tab) => tab.value(p.t0 + tau),
        }
    }

    /// Time derivative `g0'(t)` (right derivative for tabulated curves).
    pub fn g0_derivative(&self, t: f64) -> Result<f64> {
        let p = &self.params;
        let tau = t - p.t0;
        if tau < 0.0 {
            return domain(format!("g0' evaluated before t0: t = {t}"));
        }
        Ok(match &self.curve {
            InitialCurve::LiftedDefault => {
                p.lambda
                    * p.theta
                    * p.omega
                        .iter()
                        .zip(&p.x)
                        .map(|(&w, &x)| w * (-x * tau).exp())
                        .sum::<f64>()
            }
            InitialCurve::HestonLinear => p.lambda * p.theta,
            InitialCurve::Custom(tab) => tab.slope(t),
        })
    }

    /// `G0(s, t) = int_s^t g0(u) du`.
    pub fn g0_integral(&self, s: f64, t: f64) -> Result<f64> {
        let p = &self.params;
        if s > t {
            return domain(format!("g0 integral with s = {s} > t = {t}"));
        }
        if s - p.t0 < -1e-14 * p.t0.abs().max(1.0) {
            return domain(format!("g0 integral starts before t0: s = {s}"));
        }
        if s == t {
            return Ok(0.0);
        }
        let a = (s - p.t0).max(0.0);
        let b = t - p.t0;
        Ok(match &self.curve {
            InitialCurve::LiftedDefault => {
                // int_0^tau (1 - e^{-x u}) / x du = tau^2 phi2(-x tau)
                let growth: f64 = p
                    .omega
                    .iter()
                    .zip(&p.x)
                    .map(|(&w, &x)| w * (b * b * phi2_scalar(-x * b) - a * a * phi2_scalar(-x * a)))
                    .sum();
                p.v0 * (t - s) + p.lambda * p.theta * growth
            }
            InitialCurve::HestonLinear => {
                p.v0 * (t - s) + 0.5 * p.lambda * p.theta * (b * b - a * a)
            }
            InitialCurve::Custom(tab) => tab.integral(s, t),
        })
    }
}

/// Hurst parametrization of the weights and mean-reversion speeds.
///
/// With `r_N = 1 + 10 N^{-0.9}`:
///
/// ```text
/// omega_n = (r^{1/2-H} - 1) r^{(H-1/2)(1+N/2)} / (Gamma(H+1/2) Gamma(3/2-H)) * r^{(1/2-H) n}
/// x_n     = (1/2-H)/(3/2-H) * (r^{3/2-H} - 1)/(r^{1/2-H} - 1) * r^{n-1-N/2}
/// ```
pub fn hurst_parametrization(n_states: usize, hurst: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_states == 0 {
        return domain("number of states must be at least 1");
    }
    if !(hurst > 0.0 && hurst < 0.5) {
        return domain(format!("Hurst index must lie in (0, 1/2), got {hurst}"));
    }
    let n = n_states as f64;
    let r = hurst_ratio(n_states);
    let a = 0.5 - hurst;
    let weight_scale = (r.powf(a) - 1.0) * r.powf(-a * (1.0 + 0.5 * n))
        / (gamma(hurst + 0.5) * gamma(1.5 - hurst));
    let speed_scale = a / (1.5 - hurst) * (r.powf(1.5 - hurst) - 1.0) / (r.powf(a) - 1.0);
    let omega = (1..=n_states)
        .map(|k| weight_scale * r.powf(a * k as f64))
        .collect();
    let x = (1..=n_states)
        .map(|k| speed_scale * r.powf(k as f64 - 1.0 - 0.5 * n))
        .collect();
    Ok((omega, x))
}

/// Geometric ratio `r_N = 1 + 10 N^{-0.9}` of the Hurst parametrization.
pub fn hurst_ratio(n_states: usize) -> f64 {
    1.0 + 10.0 * (n_states as f64).powf(-0.9)
}

/// Unconditional mean of the variance and of the integrated variance on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    pub times: Vec<f64>,
    /// `E[V_t]`.
    pub variance: Vec<f64>,
    /// `E[X_{t0,t}] = int_{t0}^t E[V_u] du`.
    pub integrated: Vec<f64>,
}

const VOLTERRA_TOL: f64 = 1e-8;
const VOLTERRA_MAX_NODES: usize = 1 << 23;

/// Solves the renewal equation
///
/// ```text
/// E[V_T] = g0(T) - lambda sum_n omega_n int_{t0}^T exp(-x_n (T - t)) E[V_t] dt
/// ```
///
/// by the trapezoidal rule. The exponential kernel lets the convolution be carried
/// as `N` running sums, so each refinement costs `O(nodes * N)`. Substeps are
/// doubled until successive refinements agree to `1e-8` in sup-norm at the grid
/// points; the returned values are the Richardson extrapolation of the last pair.
pub fn expected_moments(grid: &[f64], model: &Model) -> Result<MeanCurve> {
    let t0 = model.params.t0;
    if grid.is_empty() {
        return domain("empty grid");
    }
    if (grid[0] - t0).abs() > 1e-12 * t0.abs().max(1.0) {
        return domain(format!("grid must start at t0 = {t0}, got {}", grid[0]));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("grid must be strictly increasing");
    }
    if grid.len() == 1 {
        return Ok(MeanCurve {
            times: grid.to_vec(),
            variance: vec![model.params.v0],
            integrated: vec![0.0],
        });
    }
    let span = grid[grid.len() - 1] - grid[0];
    let max_interval = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut substeps = ((max_interval / (span / 256.0).min(0.01)).ceil() as usize).max(2);
    let mut coarse = volterra_trapezoid(grid, model, substeps)?;
    loop {
        substeps *= 2;
        let fine = volterra_trapezoid(grid, model, substeps)?;
        let diff = sup_diff(&fine.variance, &coarse.variance)
            .max(sup_diff(&fine.integrated, &coarse.integrated));
        let nodes = substeps * (grid.len() - 1);
        if diff < VOLTERRA_TOL || nodes >= VOLTERRA_MAX_NODES {
            let extrapolate = |f: &[f64], c: &[f64]| -> Vec<f64> {
                f.iter().zip(c).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
            };
            return Ok(MeanCurve {
                times: grid.to_vec(),
                variance: extrapolate(&fine.variance, &coarse.variance),
                integrated: extrapolate(&fine.integrated, &coarse.integrated),
            });
        }
        coarse = fine;
    }
}

/// `E[V_t]` on the grid from the renewal-equation oracle.
pub fn expected_variance_curve(grid: &[f64], model: &Model) -> Result<Vec<f64>> {
    Ok(expected_moments(grid, model)?.variance)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn volterra_trapezoid(grid: &[f64], model: &Model, substeps: usize) -> Result<MeanCurve> {
    let p = &model.params;
    let n = p.n_states();
    let omega_sum = p.omega_sum();
    let mut conv = vec![0.0; n];
    let mut m_prev = model.g0(grid[0])?;
    let mut x_cum = 0.0;
    let mut variance = vec![m_prev];
    let mut integrated = vec![0.0];
    for w in grid.windows(2) {
        let delta = (w[1] - w[0]) / substeps as f64;
        let decay: Vec<f64> = p.x.iter().map(|&x| (-x * delta).exp()).collect();
        for k in 1..=substeps {
            let t = if k == substeps { w[1] } else { w[0] + k as f64 * delta };
            let mut weighted = 0.0;
            for j in 0..n {
                conv[j] = decay[j] * (conv[j] + 0.5 * delta * m_prev);
                weighted += p.omega[j] * conv[j];
            }
            let m = (model.g0(t)? - p.lambda * weighted) / (1.0 + 0.5 * p.lambda * delta * omega_sum);
            for c in conv.iter_mut() {
                *c += 0.5 * delta * m;
            }
            x_cum += 0.5 * delta * (m_prev + m);
            m_prev = m;
        }
        variance.push(m_prev);
        integrated.push(x_cum);
    }
    Ok(MeanCurve {
        times: grid.to_vec(),
        variance,
        integrated,
    })
}

/// Closed-form `E[V_t]` of the classical Heston model, `(V0 - theta) e^{-lambda t} + theta`
/// (time measured from `t0`), with the `lambda -> 0` limit `V0`.
pub fn heston_mean_variance(t: f64, params: &ModelParams) -> Result<f64> {
    require_heston(params)?;
    let tau = t - params.t0;
    Ok((params.v0 - params.theta) * (-params.lambda * tau).exp() + params.theta)
}

/// Closed-form `E[X_{t0,t}] = -(V0 - theta) e^{-lambda t}/lambda + theta t + (V0 - theta)/lambda`.
pub fn heston_mean_integrated_variance(t: f64, params: &ModelParams) -> Result<f64> {
    require_heston(params)?;
    let tau = t - params.t0;
    // (1 - e^{-lambda tau}) / lambda = tau phi1(-lambda tau), finite as lambda -> 0
    Ok(params.theta * tau + (params.v0 - params.theta) * tau * phi1_scalar(-params.lambda * tau))
}

fn require_heston(params: &ModelParams) -> Result<()> {
    if !params.is_heston_collapse() {
        return domain("closed-form Heston moments need N = 1, omega = 1, x = 0");
    }
    Ok(())
}
