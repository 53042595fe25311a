use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::drift::DriftMatrix;
use super::matfun::{chi_integral_quadrature, e_matrix_integral, expm, phi1};
use super::odes::solve_moment_odes;
use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::model::Model;

/// Parts of a step that depend only on its length. Shared between steps of
/// equal size.
#[derive(Debug, Clone)]
pub struct StepMatrices {
    pub dt: f64,
    pub exp_a_dt: DMatrix<f64>,
    pub phi1: DMatrix<f64>,
    /// `int_0^dt e^{A(dt-w)} 1 omega^T e^{A w} dw`.
    pub e_matrix: DMatrix<f64>,
    /// Linear map `U_s -> chi U_s` giving the state-dependent part of
    /// `E_s[X^n Z]`.
    pub chi_map: DMatrix<f64>,
    /// `phi1^T omega`, so that `omega . (phi1 U) = omega_phi1 . U`.
    pub omega_phi1: DVector<f64>,
}

impl StepMatrices {
    pub fn new(drift: &DriftMatrix, nu: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return domain(format!("step size must be positive, got {dt}"));
        }
        let n = drift.n();
        let exp_a_dt = expm(&(&drift.a * dt));
        let phi1 = phi1(&drift.a, dt);
        let e_matrix = e_matrix_integral(drift, dt);
        let chi_map = if drift.is_singular() {
            chi_integral_quadrature(&drift.a, &drift.omega, nu, dt)
        } else {
            let ones = DVector::from_element(n, 1.0);
            let inner = &e_matrix - &phi1 * (&ones * drift.omega.transpose());
            // inner A^{-1} via A^T Y = inner^T
            let y = drift
                .a
                .transpose()
                .lu()
                .solve(&inner.transpose())
                .ok_or_else(|| Error::Invariant("drift matrix LU solve failed".into()))?;
            y.transpose() * nu
        };
        let omega_phi1 = phi1.transpose() * &drift.omega;
        Ok(Self {
            dt,
            exp_a_dt,
            phi1,
            e_matrix,
            chi_map,
            omega_phi1,
        })
    }
}

/// Everything about step `[t_start, t_end]` that does not depend on the path.
#[derive(Debug, Clone)]
pub struct StepPrecompute {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub matrices: Arc<StepMatrices>,
    pub xi: DVector<f64>,
    pub psi: DVector<f64>,
    /// `G0(t_start, t_end)`.
    pub g0_int: f64,
    /// `g0(t_end)`.
    pub g0_next: f64,
    /// `omega . xi + G0`, the state-independent part of the conditional mean.
    pub alpha_offset: f64,
}

impl StepPrecompute {
    /// `E[X_{s,t} | U_s = u]`.
    pub fn conditional_mean(&self, u: &DVector<f64>) -> f64 {
        self.matrices.omega_phi1.dot(u) + self.alpha_offset
    }
}

pub fn precompute_step(model: &Model, drift: &DriftMatrix, t_start: f64, t_end: f64) -> Result<StepPrecompute> {
    let dt = t_end - t_start;
    let matrices = Arc::new(StepMatrices::new(drift, model.params.nu, dt)?);
    finish_step(model, drift, t_start, t_end, matrices)
}

fn finish_step(
    model: &Model,
    drift: &DriftMatrix,
    t_start: f64,
    t_end: f64,
    matrices: Arc<StepMatrices>,
) -> Result<StepPrecompute> {
    let odes = solve_moment_odes(model, drift, t_start, t_end)?;
    let g0_int = model.g0_integral(t_start, t_end)?;
    let g0_next = model.g0(t_end)?;
    if g0_next < 0.0 {
        return domain(format!("initial curve is negative at t = {t_end}"));
    }
    let alpha_offset = drift.omega.dot(&odes.xi) + g0_int;
    Ok(StepPrecompute {
        t_start,
        t_end,
        dt: t_end - t_start,
        matrices,
        xi: odes.xi,
        psi: odes.psi,
        g0_int,
        g0_next,
        alpha_offset,
    })
}

/// One `StepPrecompute` per grid step; the matrix parts are computed once per
/// distinct step size.
pub fn precompute_grid(model: &Model, drift: &DriftMatrix, grid: &TimeGrid) -> Result<Vec<StepPrecompute>> {
    let mut cache: Vec<Arc<StepMatrices>> = Vec::new();
    let mut steps = Vec::with_capacity(grid.n_steps());
    for i in 0..grid.n_steps() {
        let (s, t) = grid.step(i);
        let dt = t - s;
        let matrices = match cache.iter().find(|m| (m.dt - dt).abs() <= 1e-12 * dt) {
            Some(m) => Arc::clone(m),
            None => {
                let m = Arc::new(StepMatrices::new(drift, model.params.nu, dt)?);
                cache.push(Arc::clone(&m));
                m
            }
        };
        steps.push(finish_step(model, drift, s, t, matrices)?);
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{expected_moments, ModelParams, InitialCurve};
    use crate::presets::Preset;
    use crate::quadrature::integrate_scalar;

    #[test]
    fn equidistant_steps_share_matrices() {
        let m = Preset::Set1.model().unwrap();
        let d = DriftMatrix::new(&m.params);
        let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let steps = precompute_grid(&m, &d, &grid).unwrap();
        assert!(Arc::ptr_eq(&steps[0].matrices, &steps[1].matrices));
        assert!((&steps[0].xi - &steps[1].xi).amax() > 0.0);
        assert!(steps[0].g0_int != steps[1].g0_int);
    }

    #[test]
    fn first_step_mean_matches_volterra() {
        let m = Preset::Set1.model().unwrap();
        let d = DriftMatrix::new(&m.params);
        let pre = precompute_step(&m, &d, 0.0, 5.0).unwrap();
        let alpha = pre.conditional_mean(&DVector::zeros(5));
        let oracle = expected_moments(&[0.0, 5.0], &m).unwrap().integrated[1];
        assert!((alpha - oracle).abs() < 1e-6, "{alpha} vs {oracle}");
    }

    #[test]
    fn heston_chi_matches_scalar_quadrature() {
        let (lambda, nu, h) = (2.0, 0.2, 0.25);
        let p = ModelParams::heston(lambda, nu, 0.09, 0.04, 0.0).unwrap();
        let m = Model::new(p, InitialCurve::HestonLinear).unwrap();
        let d = DriftMatrix::new(&m.params);
        let pre = precompute_step(&m, &d, 0.0, h).unwrap();
        // chi = nu int_0^h e^{-lambda (h-w)} (1 - e^{-lambda w}) / lambda dw
        let quad = nu
            * integrate_scalar(
                |w| (-lambda * (h - w)).exp() * (1.0 - (-lambda * w).exp()) / lambda,
                0.0,
                h,
                1e-14,
            );
        assert!((pre.matrices.chi_map[(0, 0)] - quad).abs() < 1e-12);
    }

    #[test]
    fn singular_drift_uses_quadrature() {
        let p = ModelParams::heston(0.0, 0.3, 0.04, 0.04, 0.0).unwrap();
        let m = Model::new(p, InitialCurve::HestonLinear).unwrap();
        let d = DriftMatrix::new(&m.params);
        let pre = precompute_step(&m, &d, 0.0, 0.5).unwrap();
        // A = 0: chi = nu int_0^h w dw
        assert!((pre.matrices.chi_map[(0, 0)] - 0.3 * 0.125).abs() < 1e-12);
        assert!((pre.matrices.phi1[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn maps_vanish_with_step() {
        let m = Preset::Set2.model().unwrap();
        let d = DriftMatrix::new(&m.params);
        let pre = precompute_step(&m, &d, 0.0, 1e-8).unwrap();
        assert!(pre.matrices.chi_map.amax() < 1e-12);
        assert!(pre.matrices.phi1.amax() < 1e-7);
        assert!(pre.psi.amax() < 1e-12);
    }
}
