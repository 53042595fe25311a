//! Monte Carlo simulation of the lifted Heston model.
//!
//! The core scheme samples the integrated variance over each step from an
//! inverse Gaussian law whose parameters come from the best linear relation
//! between the integrated variance and the stochastic integral driving the
//! state, constrained so that the variance never turns negative. An
//! Euler–Maruyama baseline, mean oracles, and VIX option pricing sit alongside.

// `!(x > 0.0)` is used on purpose so that NaN fails domain checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clp;
pub mod error;
pub mod euler;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod numerics;
pub mod presets;
pub mod pricing;
pub mod quadrature;
pub mod sampling;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use model::{InitialCurve, Model, ModelParams};
pub use presets::Preset;
