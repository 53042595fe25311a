use lifted_heston::euler::{euler_step_with_increments, EulerConfig, EulerSimulator, NegativeVarianceFix};
use lifted_heston::model::heston_mean_variance;
use lifted_heston::sim::{PathState, RunSpec};
use lifted_heston::stats::Moments;
use lifted_heston::{Preset, TimeGrid};
use proptest::prelude::*;

fn terminal(preset: Preset, steps: usize, noise_substeps: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let model = preset.model().unwrap();
    let config = EulerConfig { noise_substeps, ..EulerConfig::default() };
    let out = EulerSimulator::new(&model, &TimeGrid::uniform(0.0, 1.0, steps).unwrap(), config)
        .unwrap()
        .simulate(&RunSpec::new(n, 6))
        .unwrap();
    (out.x_t, out.v_t)
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn halving_the_step_with_shared_noise_approaches_the_finest_grid() {
    let finest = 512;
    for preset in [Preset::Set1, Preset::Heston] {
        let (x_ref, v_ref) = terminal(preset, finest, 1, 2000);
        let dists: Vec<(f64, f64)> = [8, 16, 32, 64, 128]
            .iter()
            .map(|&steps| {
                let (x, v) = terminal(preset, steps, finest / steps, 2000);
                (rms(&x, &x_ref), rms(&v, &v_ref))
            })
            .collect();
        for w in dists.windows(2) {
            assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "{preset}: {dists:?}");
        }
    }
}

#[test]
fn euler_mean_converges_to_the_heston_oracle() {
    let model = Preset::Heston.model().unwrap();
    let out = EulerSimulator::new(&model, &TimeGrid::uniform(0.0, 1.0, 200).unwrap(), EulerConfig::default())
        .unwrap()
        .simulate(&RunSpec::new(50_000, 8))
        .unwrap();
    let m = Moments::of(&out.v_t).unwrap();
    let exact = heston_mean_variance(1.0, &model.params).unwrap();
    assert!((m.mean - exact).abs() < 3.0 * m.se_mean);
}

#[test]
fn fixes_change_paths_that_reach_negative_variance() {
    let model = Preset::Set3.model().unwrap();
    let grid = TimeGrid::uniform(0.0, 1.0, 100).unwrap();
    let run = |fix| {
        EulerSimulator::new(&model, &grid, EulerConfig { fix, ..EulerConfig::default() })
            .unwrap()
            .simulate(&RunSpec::new(500, 4))
            .unwrap()
    };
    let trunc = run(NegativeVarianceFix::FullTruncation);
    let refl = run(NegativeVarianceFix::Reflection);
    let absorb = run(NegativeVarianceFix::Absorption);
    assert!(trunc.diagnostics.negative_variance_steps > 0);
    assert_eq!(absorb.diagnostics.negative_variance_steps, 0);
    assert!(absorb.v_t.iter().all(|&v| v >= 0.0));
    assert_ne!(trunc.x_t, refl.x_t);
}

proptest! {
    #[test]
    fn integrated_variance_is_nondecreasing_under_every_fix(
        v in -0.2f64..0.3,
        dw1 in -0.5f64..0.5,
        dw2 in -0.5f64..0.5,
        fix in prop::sample::select(vec![
            NegativeVarianceFix::FullTruncation,
            NegativeVarianceFix::Reflection,
            NegativeVarianceFix::Absorption,
        ]),
    ) {
        let model = Preset::Set1.model().unwrap();
        let mut state = PathState::initial(0.0, 5, v);
        state.u.fill(v - model.params.v0);
        state.v = v;
        let config = EulerConfig { fix, ..EulerConfig::default() };
        euler_step_with_increments(&mut state, &model, 0.01, model.g0(0.01).unwrap(), dw1, dw2, &config);
        prop_assert!(state.x_cum >= 0.0);
        prop_assert!(state.log_s.is_finite());
        if fix == NegativeVarianceFix::Absorption {
            prop_assert!(state.v >= 0.0);
        }
    }
}
