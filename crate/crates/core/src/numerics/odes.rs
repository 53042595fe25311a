//! Deterministic parts of the conditional moments over one step `[s, t]`:
//!
//! ```text
//! xi'  = A xi  - lambda G0(s, u) 1,                      xi_s  = 0
//! psi' = A psi + nu (omega . xi_u + G0(s, u)) 1,         psi_s = 0
//! ```
//!
//! Both are integrated together by classical RK4 on a shared substep grid.

use nalgebra::DVector;

use super::drift::DriftMatrix;
use crate::error::{domain, Result};
use crate::model::Model;

/// Minimum number of RK4 substeps per scheme step.
pub const DEFAULT_SUBSTEPS: usize = 64;
const REFINE_TOL: f64 = 1e-9;
const MAX_SUBSTEPS: usize = 1 << 22;

#[derive(Debug, Clone)]
pub struct MomentOdeSolution {
    pub xi: DVector<f64>,
    pub psi: DVector<f64>,
    /// Substeps of the accepted (finer) run.
    pub substeps: usize,
}

fn check_interval(model: &Model, s: f64, t: f64) -> Result<()> {
    if !(t >= s) {
        return domain(format!("ODE interval [{s}, {t}] is reversed"));
    }
    if s < model.params.t0 {
        return domain(format!("ODE interval starts before t0: s = {s}"));
    }
    Ok(())
}

fn rk4(model: &Model, drift: &DriftMatrix, s: f64, t: f64, substeps: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = drift.n();
    let mut xi = DVector::zeros(n);
    let mut psi = DVector::zeros(n);
    if t == s {
        return Ok((xi, psi));
    }
    let p = &model.params;
    let a = &drift.a;
    let omega = &drift.omega;
    let h = (t - s) / substeps as f64;
    let rhs = |xi: &DVector<f64>, psi: &DVector<f64>, g: f64| {
        let mut dxi = a * xi;
        dxi.add_scalar_mut(-p.lambda * g);
        let mut dpsi = a * psi;
        dpsi.add_scalar_mut(p.nu * (omega.dot(xi) + g));
        (dxi, dpsi)
    };
    let mut g_left = 0.0;
    for k in 0..substeps {
        let u = s + k as f64 * h;
        let g_mid = model.g0_integral(s, u + 0.5 * h)?;
        let g_right = model.g0_integral(s, if k + 1 == substeps { t } else { u + h })?;
        let (k1x, k1p) = rhs(&xi, &psi, g_left);
        let (k2x, k2p) = rhs(&(&xi + &k1x * (0.5 * h)), &(&psi + &k1p * (0.5 * h)), g_mid);
        let (k3x, k3p) = rhs(&(&xi + &k2x * (0.5 * h)), &(&psi + &k2p * (0.5 * h)), g_mid);
        let (k4x, k4p) = rhs(&(&xi + &k3x * h), &(&psi + &k3p * h), g_right);
        xi += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        psi += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        g_left = g_right;
    }
    Ok((xi, psi))
}

/// `xi_t` with a fixed number of RK4 substeps.
pub fn solve_xi(model: &Model, drift: &DriftMatrix, s: f64, t: f64, substeps: usize) -> Result<DVector<f64>> {
    check_interval(model, s, t)?;
    Ok(rk4(model, drift, s, t, substeps.max(1))?.0)
}

/// `psi_t` with a fixed number of RK4 substeps (xi is carried on the same grid).
pub fn solve_psi(model: &Model, drift: &DriftMatrix, s: f64, t: f64, substeps: usize) -> Result<DVector<f64>> {
    check_interval(model, s, t)?;
    Ok(rk4(model, drift, s, t, substeps.max(1))?.1)
}

/// Solves for `(xi_t, psi_t)`, doubling the substeps from
/// `max(64, 4 h ||A||_inf)` until the sup-norm change drops below `1e-9`.
pub fn solve_moment_odes(model: &Model, drift: &DriftMatrix, s: f64, t: f64) -> Result<MomentOdeSolution> {
    check_interval(model, s, t)?;
    let stiff = (4.0 * (t - s) * drift.norm_inf()).ceil() as usize;
    let mut substeps = DEFAULT_SUBSTEPS.max(stiff);
    let (mut xi, mut psi) = rk4(model, drift, s, t, substeps)?;
    loop {
        let (fx, fp) = rk4(model, drift, s, t, 2 * substeps)?;
        let change = (&fx - &xi).amax().max((&fp - &psi).amax());
        substeps *= 2;
        xi = fx;
        psi = fp;
        if change < REFINE_TOL || substeps >= MAX_SUBSTEPS {
            return Ok(MomentOdeSolution { xi, psi, substeps });
        }
    }
}
