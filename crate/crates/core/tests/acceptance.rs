//! Acceptance run: one PASS/FAIL line per criterion, with its diagnostics and runtime.
//! Exits nonzero if a criterion fails that is not on the expected-red list.

use std::io::Write;
use std::time::{Duration, Instant};

use lifted_heston::clp::{step_coefficients, ClpSimulator, PathState};
use lifted_heston::euler::{EulerConfig, EulerSimulator, NegativeVarianceFix};
use lifted_heston::experiments::{
    cmd_converge, cmd_sensitivity, cmd_simulate, cmd_vix, parse_pairs, run_scheme, sensitivity_table, vix_study,
    ExperimentConfig, Scheme, SensitivityParam, VixRun,
};
use lifted_heston::model::{expected_moments, heston_mean_variance};
use lifted_heston::numerics::{e_matrix_integral, e_matrix_quadrature, expm, phi1, DriftMatrix};
use lifted_heston::sampling::{inverse_gaussian_cdf, sample_inverse_gaussian, IgParams, RngStream};
use lifted_heston::sim::{with_threads, Execution, RunSpec};
use lifted_heston::stats::{bootstrap_se, ks_distance, ols, variance, Moments};
use lifted_heston::{Model, ModelParams, Preset, Result, TimeGrid};
use nalgebra::DMatrix;

/// Criteria whose failure is analysed and expected; see the README.
const EXPECTED_RED: &[usize] = &[9];

struct Verdict {
    pass: bool,
    detail: String,
}

/// Id, name, runtime budget in seconds, check.
type Criterion = (usize, &'static str, u64, fn() -> Result<Verdict>);

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn clp(model: &Model, grid: &TimeGrid) -> Result<ClpSimulator> {
    ClpSimulator::new(model, grid)
}

fn c1_heston_collapse() -> Result<Verdict> {
    let model = Preset::Heston.model()?;
    let out = clp(&model, &TimeGrid::equidistant(0.0, 1.0, 0.25)?)?.simulate(&RunSpec::new(200_000, 101))?;
    let m = Moments::of(&out.v_t)?;
    let exact = heston_mean_variance(1.0, &model.params)?;
    let z = (m.mean - exact) / m.se_mean;
    verdict(z.abs() <= 3.0, format!("E[V_1] = {:.6} vs closed form {exact:.6}, z = {z:+.2}", m.mean))
}

fn c2_single_step_mean() -> Result<Verdict> {
    let model = Preset::Set1.model()?;
    let out = clp(&model, &TimeGrid::uniform(0.0, 5.0, 1)?)?.simulate(&RunSpec::new(200_000, 102))?;
    let m = Moments::of(&out.x_t)?;
    let exact = expected_moments(&[0.0, 5.0], &model)?.integrated[1];
    let z = (m.mean - exact) / m.se_mean;
    verdict(z.abs() <= 3.0, format!("E[X_0,5] = {:.6} vs Volterra {exact:.6}, z = {z:+.2}", m.mean))
}

struct VarComparison {
    rel: f64,
    diff: f64,
    se_boot: f64,
}

/// `Var(X_T)` of `scheme` on an equidistant grid against a 1000-step Euler benchmark.
fn variance_vs_benchmark(
    preset: Preset,
    scheme: Scheme,
    dt: f64,
    seed: u64,
) -> Result<(VarComparison, Moments, Moments)> {
    let model = preset.model()?;
    let n = 200_000;
    let bench_seed = seed ^ lifted_heston::experiments::BENCH_SEED_OFFSET;
    let bench = run_scheme(
        Scheme::Euler,
        &model,
        &TimeGrid::uniform(0.0, 5.0, 1000)?,
        &RunSpec::new(n, bench_seed),
        NegativeVarianceFix::FullTruncation,
    )?;
    let out = run_scheme(scheme, &model, &TimeGrid::equidistant(0.0, 5.0, dt)?, &RunSpec::new(n, seed), NegativeVarianceFix::FullTruncation)?;
    let (mb, mo) = (Moments::of(&bench.x_t)?, Moments::of(&out.x_t)?);
    let se_b = bootstrap_se(&bench.x_t, variance, 200, bench_seed);
    let se_o = bootstrap_se(&out.x_t, variance, 200, seed);
    let diff = mo.variance - mb.variance;
    Ok((
        VarComparison {
            rel: diff / mb.variance,
            diff,
            se_boot: se_b.hypot(se_o),
        },
        mo,
        mb,
    ))
}

fn within_c3_tolerance(c: &VarComparison) -> bool {
    c.diff.is_finite() && (c.rel.abs() <= 0.05 || c.diff.abs() <= 3.0 * c.se_boot)
}

fn c3_large_step_variance() -> Result<Verdict> {
    let (c, mo, mb) = variance_vs_benchmark(Preset::Set1, Scheme::Clp, 2.15, 103)?;
    verdict(
        within_c3_tolerance(&c),
        format!(
            "Var(X_T) C-LP {:.5e} vs Euler-1000 {:.5e}: {:+.2}% (combined bootstrap SE {:.2e})",
            mo.variance,
            mb.variance,
            100.0 * c.rel,
            c.se_boot
        ),
    )
}

fn c4_positivity() -> Result<Verdict> {
    let mut worst_v = f64::INFINITY;
    let mut worst_c = f64::INFINITY;
    let mut worst_slack = f64::INFINITY;
    let mut steps = 0;
    for preset in [Preset::Set1, Preset::Set2, Preset::Set3, Preset::Extreme] {
        let model = preset.model()?;
        for dt in [1.0 / 12.0, 0.25, 1.0, 5.0] {
            let out = clp(&model, &TimeGrid::equidistant(0.0, 5.0, dt)?)?.simulate(&RunSpec::new(20_000, 104))?;
            let d = &out.diagnostics;
            worst_v = worst_v.min(d.min_variance);
            worst_c = worst_c.min(d.min_constraint);
            worst_slack = worst_slack.min(d.min_slope_slack);
            steps += d.steps;
        }
    }
    verdict(
        worst_v >= 0.0 && worst_c >= -1e-12 && worst_slack >= 0.0,
        format!("{steps} steps: min V = {worst_v:.3e}, min C(0, beta_C) = {worst_c:.3e}, min beta_L - beta_C = {worst_slack:.3e}"),
    )
}

fn c5_projection_optimality() -> Result<Verdict> {
    let model = Preset::Set1.model()?;
    let sim = clp(&model, &TimeGrid::uniform(0.0, 0.5, 1)?)?;
    let c = step_coefficients(&sim.initial_state(), &sim.steps[0], &model)?;
    let out = EulerSimulator::new(&model, &TimeGrid::uniform(0.0, 0.5, 1000)?, EulerConfig::default())?
        .simulate(&RunSpec::new(100_000, 2024))?;
    let fit = ols(&out.z_t, &out.x_t)?;
    let zs = (fit.slope - c.beta) / fit.se_slope;
    let zi = (fit.intercept - c.alpha) / fit.se_intercept;
    verdict(
        zs.abs() <= 2.0 && zi.abs() <= 2.0,
        format!(
            "slope {:.6} vs beta {:.6} (z = {zs:+.2}); intercept {:.6} vs alpha {:.6} (z = {zi:+.2})",
            fit.slope, c.beta, fit.intercept, c.alpha
        ),
    )
}

fn c6_e_matrix() -> Result<Verdict> {
    let mut stream = RngStream::new(106, 0);
    let mut worst_e: f64 = 0.0;
    let mut cases = 0;
    while cases < 20 {
        let n = 1 + (stream.uniform() * 6.0) as usize;
        let lambda = 2.0 * stream.uniform();
        let omega: Vec<f64> = (0..n).map(|_| 0.05 + 2.0 * stream.uniform()).collect();
        let x: Vec<f64> = (0..n).map(|_| 20.0 * stream.uniform()).collect();
        let h = 0.01 + 3.0 * stream.uniform();
        let p = ModelParams { lambda, omega, x, ..ModelParams::heston(1.0, 0.2, 0.04, 0.04, 0.0)? };
        let drift = DriftMatrix::new(&p);
        if drift.degenerate {
            continue;
        }
        cases += 1;
        let err = (e_matrix_integral(&drift, h) - e_matrix_quadrature(&drift.a, &drift.omega, h)).amax();
        worst_e = worst_e.max(err);
    }
    let heston = DriftMatrix::new(&ModelParams::heston(2.0, 0.2, 0.09, 0.04, 0.0)?);
    let h = 0.7;
    let heston_err = (e_matrix_integral(&heston, h)[(0, 0)] - h * (-2.0 * h).exp()).abs();
    worst_e = worst_e.max(heston_err);

    let mut worst_phi: f64 = 0.0;
    let singular = ModelParams { lambda: 0.0, omega: vec![1.0, 0.5], x: vec![0.0, 3.0], ..ModelParams::heston(1.0, 0.2, 0.04, 0.04, 0.0)? };
    for p in [Preset::Set1.params()?, Preset::Set3.params()?, singular] {
        let a = DriftMatrix::new(&p).a;
        for h in [0.01, 0.5, 2.15] {
            let n = a.nrows();
            let err = (phi1(&a, h) * &a - (expm(&(&a * h)) - DMatrix::identity(n, n))).amax();
            worst_phi = worst_phi.max(err);
        }
    }
    verdict(
        worst_e < 1e-8 && worst_phi < 1e-10,
        format!("20 random draws + Heston: max |E - quadrature| = {worst_e:.2e}; max |phi1 A - (e^Ah - I)| = {worst_phi:.2e} (incl. singular A)"),
    )
}

fn c7_ig_fidelity() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (mu, gamma)) in [(1.0, 1.0), (0.1, 4.0), (2.0, 0.5)].into_iter().enumerate() {
        let ig = IgParams::new(mu, gamma)?;
        let mut stream = RngStream::new(107, k as u64);
        let xs: Vec<f64> = (0..1_000_000).map(|_| sample_inverse_gaussian(&mut stream, ig)).collect();
        let m = Moments::of(&xs)?;
        let z = (m.mean - mu) / m.se_mean;
        let rel_var = m.variance / ig.variance() - 1.0;
        let ks = ks_distance(&xs, |x| inverse_gaussian_cdf(ig, x));
        pass &= z.abs() <= 4.0 && rel_var.abs() <= 0.05 && ks < 0.002;
        parts.push(format!("({mu},{gamma}): z = {z:+.2}, var {:+.2}%, KS {ks:.5}", 100.0 * rel_var));
    }
    verdict(pass, parts.join("; "))
}

/// Running mean and variance.
#[derive(Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        self.m2 / (self.n - 1.0)
    }
}

fn c8_weak_consistency() -> Result<Verdict> {
    let model = Preset::Set1.model()?;
    let p = &model.params;
    let path = clp(&model, &TimeGrid::uniform(0.0, 1.0, 10)?)?;
    let start: PathState = path.simulate_path(&path.initial_state(), 99, 0, None, None)?.terminal;
    let omega_sum = p.omega_sum();
    let drift = model.g0_derivative(1.0)?
        + (0..p.n_states()).map(|n| p.omega[n] * (-p.x[n] * start.u[n] - p.lambda * start.v)).sum::<f64>();
    let var_limit = p.nu * p.nu * start.v * omega_sum * omega_sum;
    let literal_limit = p.nu * p.nu * start.v * p.omega.iter().map(|w| w * w).sum::<f64>();

    let n_samples = 20_000_000;
    let mut mean_err = Vec::new();
    let mut var_err = Vec::new();
    let mut literal_err = Vec::new();
    for h in [0.1, 0.01, 0.001] {
        let sim = clp(&model, &TimeGrid::new(vec![1.0, 1.0 + h])?)?;
        let mut acc = Welford::default();
        for id in 0..n_samples {
            let end = sim.simulate_path(&start, 7, id, None, None)?.terminal;
            acc.push(end.v - start.v);
        }
        mean_err.push((acc.mean / h - drift).abs());
        var_err.push((acc.variance() / h - var_limit).abs());
        literal_err.push((acc.variance() / h - literal_limit).abs());
    }
    let decreasing = |e: &[f64]| e.windows(2).all(|w| w[1] < w[0]);
    let fmt = |e: &[f64]| e.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" > ");
    verdict(
        decreasing(&mean_err) && decreasing(&var_err),
        format!(
            "V_1 = {:.4}; drift errors {}; variance errors vs nu^2 V (sum omega)^2 {}; vs literal nu^2 V sum omega^2: {}",
            start.v,
            fmt(&mean_err),
            fmt(&var_err),
            literal_err.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c9_sensitivity() -> Result<Verdict> {
    let cfg = ExperimentConfig::from_pairs(&parse_pairs("preset = set1\npaths = 100000\nseed = 109\nsens_substeps = 1000")?)?;
    let rows = sensitivity_table(&cfg)?;
    let rel = |p: SensitivityParam| rows.iter().find(|r| r.param == p).map(|r| r.relative).unwrap_or(f64::NAN);
    let v0 = rel(SensitivityParam::V0);
    let dominant = rows.iter().all(|r| r.param == SensitivityParam::V0 || r.relative.abs() < v0.abs());
    let signs = rows
        .iter()
        .filter(|r| r.param != SensitivityParam::NStates)
        .all(|r| r.sensitivity > 0.0);
    let table = rows
        .iter()
        .map(|r| format!("{} {:+.3}", r.param.name(), r.relative))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        dominant && signs,
        format!(
            "E[e^2] = {:.4e}; relative: {table}; v0 dominant: {dominant}; (lambda, nu, v0, theta, h) positive: {signs}. \
             The residual scales as nu^2 and about linearly in the variance level, so rel(v0) + rel(theta) is near 1 \
             while rel(nu) is near 2; v0 cannot dominate, and a rougher kernel (smaller h) raises the residual",
            rows[0].e2
        ),
    )
}

/// Largest 13-vs-78 vol gap over strikes where Monte Carlo resolves half a vol point.
fn smile_gap(coarse: &VixRun, fine: &VixRun) -> (f64, Vec<f64>) {
    let mut worst: f64 = 0.0;
    let mut excluded = Vec::new();
    for (a, b) in coarse.smile.iter().zip(&fine.smile) {
        let (qa, qb) = (&a.point.quote, &b.point.quote);
        match (qa.implied_vol, qb.implied_vol, qa.implied_vol_se, qb.implied_vol_se) {
            (Some(va), Some(vb), Some(sa), Some(sb)) if sa.hypot(sb) <= 0.005 => worst = worst.max((va - vb).abs()),
            _ => excluded.push(a.moneyness),
        }
    }
    (worst, excluded)
}

fn c10_vix() -> Result<Verdict> {
    let cfg = ExperimentConfig::from_pairs(&parse_pairs("preset = set1\npaths = 200000\nseed = 110\nsteps = 13, 26, 39, 78\nscheme = clp")?)?;
    let runs = vix_study(&cfg)?;
    let tower_ok = runs.iter().all(|r| r.tower_diff.abs() <= 3.0 * r.se_tower_diff);
    let towers = runs
        .iter()
        .map(|r| format!("{}: {:+.2}", r.n_steps, r.tower_diff / r.se_tower_diff))
        .collect::<Vec<_>>()
        .join(", ");
    let (gap, excluded) = smile_gap(&runs[0], &runs[3]);
    verdict(
        tower_ok && gap < 0.005 && excluded.len() < runs[0].smile.len(),
        format!(
            "max |iv13 - iv78| = {:.3} vol pts on resolved strikes (excluded moneyness {excluded:?}); tower z by steps {towers}",
            100.0 * gap
        ),
    )
}

fn c11_euler_divergence() -> Result<Verdict> {
    let (e, mo, mb) = variance_vs_benchmark(Preset::Set3, Scheme::Euler, 0.025, 111)?;
    let bench_se = mb.se_variance;
    let err = if e.diff.is_finite() { e.diff.abs() } else { f64::INFINITY };
    let (c, _, _) = variance_vs_benchmark(Preset::Set3, Scheme::Clp, 2.15, 112)?;
    verdict(
        err > 10.0 * bench_se && within_c3_tolerance(&c),
        format!(
            "Euler dt = 0.025: Var(X_T) = {:.3e}, error {:.2e} = {:.1e} benchmark SE; C-LP dt = 2.15: {:+.2}%",
            mo.variance,
            err,
            err / bench_se,
            100.0 * c.rel
        ),
    )
}

fn c12_determinism() -> Result<Verdict> {
    let dir = std::env::temp_dir().join(format!("lh-acceptance-{}", std::process::id()));
    let base = "preset = set2\npaths = 4000\nseed = 112\nsteps = 13\nbench_steps = 100\nsens_substeps = 50\nscheme = clp, euler\n";
    type Cmd = fn(&ExperimentConfig) -> Result<Vec<std::path::PathBuf>>;
    let cmds: [(&str, Cmd); 4] = [
        ("simulate", cmd_simulate),
        ("converge", cmd_converge),
        ("sensitivity", cmd_sensitivity),
        ("vix", cmd_vix),
    ];
    let mut identical = true;
    let mut files = 0;
    for (name, cmd) in cmds {
        let mut outputs = Vec::new();
        for threads in [1, 4] {
            let mut pairs = parse_pairs(base)?;
            pairs.push(("out".into(), dir.join(format!("{name}-{threads}")).display().to_string()));
            let cfg = ExperimentConfig::from_pairs(&pairs)?;
            let written = with_threads(Some(threads), || cmd(&cfg))??;
            let bytes: Vec<Vec<u8>> = written.iter().map(std::fs::read).collect::<std::io::Result<_>>()?;
            files += bytes.len();
            outputs.push(bytes);
        }
        identical &= outputs[0] == outputs[1];
    }
    // the scheme core itself, sequential against parallel
    let model = Preset::Set1.model()?;
    let sim = clp(&model, &TimeGrid::uniform(0.0, 5.0, 10)?)?;
    let spec = RunSpec::new(10_000, 5);
    let seq = sim.simulate(&spec.clone().with_execution(Execution::Sequential))?;
    let par = sim.simulate(&spec.with_execution(Execution::Parallel))?;
    identical &= seq.x_t == par.x_t && seq.s_t == par.s_t;
    let _ = std::fs::remove_dir_all(&dir);
    verdict(identical, format!("{files} CSV files compared across 1 and 4 threads; sequential vs parallel core identical: {}", seq.x_t == par.x_t))
}

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "Heston collapse oracle", 30, c1_heston_collapse),
        (2, "single-step mean exactness", 10, c2_single_step_mean),
        (3, "large-step variance convergence", 180, c3_large_step_variance),
        (4, "positivity robustness", 180, c4_positivity),
        (5, "projection optimality", 60, c5_projection_optimality),
        (6, "E-matrix correctness", 5, c6_e_matrix),
        (7, "IG sampler fidelity", 10, c7_ig_fidelity),
        (8, "weak consistency", 60, c8_weak_consistency),
        (9, "sensitivity study", 120, c9_sensitivity),
        (10, "VIX pipeline", 180, c10_vix),
        (11, "Euler divergence reproduction", 180, c11_euler_divergence),
        (12, "determinism", 60, c12_determinism),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = Vec::new();
    let mut out = std::io::stdout();
    for (id, name, budget, run) in criteria {
        if only.is_some_and(|k| k != id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(v) => (v.pass && in_time, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = match (pass, EXPECTED_RED.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        writeln!(
            out,
            "criterion {id:2} {tag}: {name} [{:.1} s / {budget} s{}] {detail}",
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        )
        .unwrap();
        out.flush().unwrap();
        if !pass && !EXPECTED_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}

