use std::path::PathBuf;

use super::{ensure_dir, run_scheme, write_csv, ExperimentConfig};
use crate::error::{Error, Result};
use crate::sim::RunSpec;

/// Simulates every configured scheme on the single configured grid and writes
/// `<scheme>_terminal.csv` and `<scheme>_summary.csv` to the output directory.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let grids = cfg.grids(model.params.t0)?;
    let [grid] = grids.as_slice() else {
        return Err(Error::Config("simulate takes exactly one step count or step size".into()));
    };
    ensure_dir(&cfg.out)?;
    let spec = RunSpec::new(cfg.n_paths, cfg.seed);
    let mut written = Vec::new();
    for &scheme in &cfg.schemes {
        let out = run_scheme(scheme, &model, grid, &spec, cfg.fix)?;

        let rows: Vec<Vec<String>> = (0..out.n_paths())
            .map(|i| {
                vec![
                    i.to_string(),
                    out.s_t[i].to_string(),
                    out.v_t[i].to_string(),
                    out.x_t[i].to_string(),
                ]
            })
            .collect();
        let path = cfg.out.join(format!("{scheme}_terminal.csv"));
        write_csv(&path, &["path_id", "S_T", "V_T", "X_T"], &rows)?;
        written.push(path);

        let rows: Vec<Vec<String>> = out
            .summary()?
            .into_iter()
            .map(|r| {
                let m = r.moments;
                vec![
                    r.quantity.to_string(),
                    m.n.to_string(),
                    m.mean.to_string(),
                    m.se_mean.to_string(),
                    m.variance.to_string(),
                    m.se_variance.to_string(),
                ]
            })
            .collect();
        let path = cfg.out.join(format!("{scheme}_summary.csv"));
        write_csv(&path, &["quantity", "n_paths", "mean", "se_mean", "variance", "se_variance"], &rows)?;
        written.push(path);
    }
    Ok(written)
}
