//! Experiment harness: configuration, the four commands and CSV output.

mod config;
mod converge;
mod sensitivity;
mod simulate;
mod vix;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

pub use config::{parse_pairs, CurveKind, ExperimentConfig, ModelSpec, Scheme, BENCH_SEED_OFFSET};
pub use converge::{cmd_converge, convergence_table, ConvergenceRow, ERROR_CAP};
pub use sensitivity::{cmd_sensitivity, sensitivity_table, SensitivityParam, SensitivityRow};
pub use simulate::cmd_simulate;
pub use vix::{cmd_vix, vix_study, VixRun, VixSmileRow};

use crate::clp::ClpSimulator;
use crate::error::{Error, Result};
use crate::euler::{EulerConfig, EulerSimulator, NegativeVarianceFix};
use crate::grid::TimeGrid;
use crate::model::Model;
use crate::sim::{RunSpec, SimOutput};

/// Simulates `scheme` on `grid` from the model's initial state.
pub fn run_scheme(
    scheme: Scheme,
    model: &Model,
    grid: &TimeGrid,
    spec: &RunSpec,
    fix: NegativeVarianceFix,
) -> Result<SimOutput> {
    match scheme {
        Scheme::Clp => ClpSimulator::new(model, grid)?.simulate(spec),
        Scheme::Euler => {
            let config = EulerConfig { fix, ..EulerConfig::default() };
            EulerSimulator::new(model, grid, config)?.simulate(spec)
        }
    }
}

/// Writes a header row and records with LF line endings.
pub(crate) fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}
