//! Matrix machinery behind the conditional moments of the integrated variance.

mod drift;
mod matfun;
mod odes;
mod precompute;

pub use drift::{DriftMatrix, Eigen};
pub use matfun::{chi_integral_quadrature, e_matrix_integral, e_matrix_quadrature, expm, phi1};
pub use odes::{solve_moment_odes, solve_psi, solve_xi, MomentOdeSolution, DEFAULT_SUBSTEPS};
pub use precompute::{precompute_grid, precompute_step, StepMatrices, StepPrecompute};

/// `phi1(z) = (e^z - 1) / z`, with `phi1(0) = 1`.
pub fn phi1_scalar(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    } else {
        z.exp_m1() / z
    }
}

/// `phi2(z) = (e^z - 1 - z) / z^2`, with `phi2(0) = 1/2`.
pub fn phi2_scalar(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0)))
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

/// `int_0^h exp(a (h - w)) exp(b w) dw`, stable for close or widely separated rates.
pub fn exp_divided_difference(a: f64, b: f64, h: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    h * (hi * h).exp() * phi1_scalar((lo - hi) * h)
}
