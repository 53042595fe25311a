//! Adaptive Gauss–Legendre quadrature for scalar and matrix-valued integrands.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;

const ORDER: usize = 15;
const MAX_DEPTH: u32 = 40;

/// Values that can be integrated: closed under addition and scaling, with a
/// sup-norm for the error estimate.
pub trait Integrand: Clone {
    fn add(&self, other: &Self) -> Self;
    fn scale(&self, factor: f64) -> Self;
    fn sup_norm(&self) -> f64;
}

impl Integrand for f64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }

    fn scale(&self, factor: f64) -> Self {
        self * factor
    }

    fn sup_norm(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for DMatrix<f64> {
    fn add(&self, other: &Self) -> Self {
        self + other
    }

    fn scale(&self, factor: f64) -> Self {
        self * factor
    }

    fn sup_norm(&self) -> f64 {
        self.amax()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n(z) and its derivative
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn panel<T: Integrand>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> T {
    let (nodes, weights) = rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = f(mid + half * nodes[0]).scale(weights[0]);
    for (z, w) in nodes.iter().zip(weights).skip(1) {
        acc = acc.add(&f(mid + half * z).scale(*w));
    }
    acc.scale(half)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` (sup-norm) by
/// recursive bisection of 15-point Gauss–Legendre panels.
pub fn integrate<T: Integrand>(f: impl Fn(f64) -> T, a: f64, b: f64, tol: f64) -> T {
    let whole = panel(&f, a, b);
    refine(&f, a, b, whole, tol, 0)
}

fn refine<T: Integrand>(f: &impl Fn(f64) -> T, a: f64, b: f64, whole: T, tol: f64, depth: u32) -> T {
    let mid = 0.5 * (a + b);
    let left = panel(f, a, mid);
    let right = panel(f, mid, b);
    let split = left.add(&right);
    let err = split.add(&whole.scale(-1.0)).sup_norm();
    if err <= tol || depth >= MAX_DEPTH {
        return split;
    }
    let l = refine(f, a, mid, left, 0.5 * tol, depth + 1);
    let r = refine(f, mid, b, right, 0.5 * tol, depth + 1);
    l.add(&r)
}

pub fn integrate_scalar(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    integrate(f, a, b, tol)
}
