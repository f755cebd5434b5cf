use csbp_core::model::{build_model, CoefficientFn, FragmentationKernel, JumpMeasure, ModelConfig, ModelSpec};
use csbp_core::montecarlo::{estimate_event_prob, run_paths, PathEvent};
use csbp_core::simulate::{simulate_path, EventKind, Outcome, SimConfig};
use proptest::prelude::*;

fn catastrophe_only(r: f64, theta: f64) -> ModelSpec {
    build_model(ModelConfig {
        r: CoefficientFn::Affine { c0: r, c1: 0.0 },
        kappa: FragmentationKernel::Atom { theta },
        ..ModelConfig::zero()
    })
    .unwrap()
}

fn feller(c: f64) -> ModelSpec {
    build_model(ModelConfig {
        sigma2: CoefficientFn::Linear { c },
        ..ModelConfig::zero()
    })
    .unwrap()
}

fn cfg(t_max: f64, seed: u64) -> SimConfig {
    SimConfig {
        t_max,
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn catastrophe_only_mean_decays_exponentially() {
    // N ~ Poisson(r t) halvings: E[X_t] = exp(-r t (1 - θ)) = e^-1 for r = 1, θ = 1/2, t = 2.
    let m = catastrophe_only(1.0, 0.5);
    let c = cfg(2.0, 11);
    let n = 4000;
    let finals = run_paths(n, 1, |i| simulate_path(&m, &c, 1.0, i).map(|p| p.final_state())).unwrap();
    let mean = finals.iter().sum::<f64>() / n as f64;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let exact = (-1.0f64).exp();
    assert!((mean - exact).abs() <= 3.0 * se + 1e-3, "{mean} ± {se} vs {exact}");
}

#[test]
fn feller_absorption_matches_closed_form() {
    // dX = sqrt(2 c X) dB started at 1 is absorbed by t with probability exp(-1 / (c t)).
    let m = feller(0.5);
    let e = estimate_event_prob(&m, &cfg(4.0, 5), 1.0, PathEvent::AbsorbedBy { t: 4.0 }, 4000, 1).unwrap();
    let exact = (-0.5f64).exp();
    assert!((e.mean - exact).abs() <= 3.0 * e.stderr + 0.01, "{e} vs {exact}");
}

#[test]
fn catastrophes_absorb_only_from_below_threshold_over_theta() {
    let theta = 0.1;
    let m = catastrophe_only(20.0, theta);
    let c = cfg(2.0, 3);
    let mut absorbed = 0;
    for i in 0..200 {
        let p = simulate_path(&m, &c, 1.0, i).unwrap();
        if let Outcome::Absorbed { .. } = p.outcome {
            absorbed += 1;
            let last = p.events.last().expect("only catastrophes move this model");
            assert!(matches!(last.kind, EventKind::Catastrophe { .. }));
            assert!(last.before <= c.x_abs / theta * (1.0 + 1e-12), "absorbed from {}", last.before);
        }
    }
    assert!(absorbed > 0, "horizon long enough to reach the threshold");
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let m = feller(1.0);
    let c = cfg(3.0, 17);
    let e = |threads| estimate_event_prob(&m, &c, 1.0, PathEvent::SurvivesAt { t: 3.0 }, 500, threads).unwrap();
    let (a, b) = (e(1), e(4));
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.config_hash, b.config_hash);
}

fn any_model() -> impl Strategy<Value = ModelSpec> {
    (0.0..3.0f64, -1.0..3.0f64, 0.0..2.0f64, 0.0..2.0f64, 0.0..2.0f64, 0.05..1.0f64).prop_map(
        |(s, g, p, r0, r1, theta)| {
            build_model(ModelConfig {
                g: CoefficientFn::Linear { c: g },
                sigma2: CoefficientFn::Linear { c: s },
                p: CoefficientFn::Linear { c: p },
                r: CoefficientFn::Affine { c0: r0, c1: r1 },
                pi: JumpMeasure::Exponential { mass: 1.0, lambda: 2.0 },
                kappa: FragmentationKernel::Atom { theta },
            })
            .unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn paths_stay_non_negative_and_replay_exactly(m in any_model(), seed in any::<u64>(), idx in 0u64..1000) {
        let c = SimConfig { dt: 1e-2, t_max: 2.0, seed, x_max: 1e6, ..SimConfig::default() };
        let p = simulate_path(&m, &c, 1.0, idx).unwrap();
        prop_assert!(p.states.iter().all(|&x| x >= 0.0));
        prop_assert!(p.times.windows(2).all(|w| w[1] > w[0]));
        let q = simulate_path(&m, &c, 1.0, idx).unwrap();
        prop_assert_eq!(p.states.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), q.states.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(p.outcome, q.outcome);
    }

    #[test]
    fn sim_config_toml_round_trip(dt in 1e-5..1e-1f64, extra in 1.0..100.0f64, x_abs in 1e-300..1e-3f64, seed in any::<u64>()) {
        let c = SimConfig { dt, t_max: dt * extra, x_abs, seed, ..SimConfig::default() };
        let back: SimConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}
