use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::model::ModelParams;

/// Real eigendecomposition `A = V diag(eigenvalues) V^{-1}`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub vectors_inv: DMatrix<f64>,
}

/// Drift matrix `A = -lambda 1 omega^T - diag(x)` of the state processes.
///
/// With all weights positive, `W = diag(sqrt(omega))` makes `W A W^{-1}` symmetric,
/// so the spectrum is real and the eigenvectors come from a symmetric solver:
/// `V = W^{-1} Q`, `V^{-1} = Q^T W`.
#[derive(Debug, Clone)]
pub struct DriftMatrix {
    pub a: DMatrix<f64>,
    pub omega: DVector<f64>,
    /// `None` when some weight vanishes and the symmetrization is unavailable.
    pub eigen: Option<Eigen>,
    /// Set when two eigenvalues coincide within `1e-8` relative, or no
    /// decomposition is available; closed forms then give way to quadrature.
    pub degenerate: bool,
}

const GAP_TOL: f64 = 1e-8;

impl DriftMatrix {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.n_states();
        let omega = DVector::from_column_slice(&params.omega);
        let a = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { params.x[i] } else { 0.0 };
            -params.lambda * params.omega[j] - diag
        });
        let eigen = symmetrized_eigen(params);
        let degenerate = match &eigen {
            Some(e) => min_gap(&e.values) < GAP_TOL * e.values.amax().max(f64::MIN_POSITIVE),
            None => true,
        };
        Self {
            a,
            omega,
            eigen,
            degenerate,
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `||A||_inf`, the maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.a
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// True when `A` is singular or so close to it that `A^{-1}` loses accuracy.
    pub fn is_singular(&self) -> bool {
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        match &self.eigen {
            Some(e) => e.values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min) < 1e-10 * scale,
            None => {
                let lu = self.a.clone().lu();
                let u = lu.u();
                (0..self.n()).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min)
                    < 1e-12 * scale
            }
        }
    }

    /// `||V diag(values) V^{-1} - A||_inf`, if a decomposition exists.
    pub fn reconstruction_error(&self) -> Option<f64> {
        self.eigen.as_ref().map(|e| {
            let rebuilt = &e.vectors * DMatrix::from_diagonal(&e.values) * &e.vectors_inv;
            (rebuilt - &self.a)
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
    }
}

fn symmetrized_eigen(params: &ModelParams) -> Option<Eigen> {
    if params.omega.iter().any(|&w| w <= 0.0) {
        return None;
    }
    let n = params.n_states();
    let s: Vec<f64> = params.omega.iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { params.x[i] } else { 0.0 };
        -params.lambda * s[i] * s[j] - diag
    });
    let SymmetricEigen {
        eigenvectors: q,
        eigenvalues,
    } = SymmetricEigen::new(sym);
    let vectors = DMatrix::from_fn(n, n, |i, j| q[(i, j)] / s[i]);
    let vectors_inv = DMatrix::from_fn(n, n, |i, j| q[(j, i)] * s[j]);
    Some(Eigen {
        values: eigenvalues,
        vectors,
        vectors_inv,
    })
}

fn min_gap(values: &DVector<f64>) -> f64 {
    let mut sorted: Vec<f64> = values.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}
