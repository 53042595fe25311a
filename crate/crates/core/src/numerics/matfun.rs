use nalgebra::{DMatrix, DVector};

use super::drift::DriftMatrix;
use super::exp_divided_difference;
use crate::quadrature::integrate;

const QUAD_TOL: f64 = 1e-10;

/// Matrix exponential (Padé approximant with scaling and squaring).
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

/// `phi1(A, h) = int_0^h e^{A u} du`, read off the top-right block of
/// `exp([[A h, I h], [0, 0]])`; valid for singular `A`.
pub fn phi1(a: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if h == 0.0 {
        return DMatrix::zeros(n, n);
    }
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    aug.view_mut((0, n), (n, n)).fill_diagonal(h);
    expm(&aug).view((0, n), (n, n)).into_owned()
}

/// `int_0^h e^{A(h-w)} 1 omega^T e^{A w} dw` from the eigendecomposition.
///
/// In the eigenbasis the rank-one matrix `V^{-1} 1 omega^T V` factors as `u v^T`
/// with `u = V^{-1} 1`, `v = V^T omega`; the two factors are rescaled to equal
/// norm with a nonnegative first entry of `u`. Then
/// `E_ij = u_i v_j int_0^h e^{l_i (h-w)} e^{l_j w} dw` and the result is `V E V^{-1}`.
/// Degenerate spectra fall back to quadrature.
pub fn e_matrix_integral(drift: &DriftMatrix, h: f64) -> DMatrix<f64> {
    let n = drift.n();
    if h == 0.0 {
        return DMatrix::zeros(n, n);
    }
    let eig = match (&drift.eigen, drift.degenerate) {
        (Some(e), false) => e,
        _ => return e_matrix_quadrature(&drift.a, &drift.omega, h),
    };
    let mut u = &eig.vectors_inv * DVector::from_element(n, 1.0);
    let mut v = eig.vectors.transpose() * &drift.omega;
    let (nu, nv) = (u.norm(), v.norm());
    if nu > 0.0 && nv > 0.0 {
        let s = (nu * nv).sqrt();
        u *= s / nu;
        v *= s / nv;
    }
    if u[0] < 0.0 {
        u.neg_mut();
        v.neg_mut();
    }
    let l = &eig.values;
    let e = DMatrix::from_fn(n, n, |i, j| u[i] * v[j] * exp_divided_difference(l[i], l[j], h));
    &eig.vectors * e * &eig.vectors_inv
}

/// Adaptive Gauss–Legendre evaluation of `int_0^h e^{A(h-w)} 1 omega^T e^{A w} dw`.
pub fn e_matrix_quadrature(a: &DMatrix<f64>, omega: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let ones = DVector::from_element(n, 1.0);
    integrate(
        |w| {
            let left = expm(&(a * (h - w))) * &ones;
            let right = omega.transpose() * expm(&(a * w));
            left * right
        },
        0.0,
        h,
        QUAD_TOL,
    )
}

/// `nu int_0^h e^{A(h-w)} 1 omega^T phi1(A, w) dw`, the map from the state to the
/// covariance vector, by quadrature (no inverse of `A` needed).
pub fn chi_integral_quadrature(a: &DMatrix<f64>, omega: &DVector<f64>, nu: f64, h: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let ones = DVector::from_element(n, 1.0);
    let m = integrate(
        |w| {
            let left = expm(&(a * (h - w))) * &ones;
            let right = omega.transpose() * phi1(a, w);
            left * right
        },
        0.0,
        h,
        QUAD_TOL,
    );
    m * nu
}
