use csbp_core::model::{build_model, CoefficientFn, FragmentationKernel, JumpMeasure, ModelConfig, ModelSpec};
use proptest::prelude::*;

fn coefficient() -> impl Strategy<Value = CoefficientFn> {
    prop_oneof![
        Just(CoefficientFn::Zero),
        (-10.0..10.0f64).prop_map(|c| CoefficientFn::Linear { c }),
        (0.0..10.0f64, 0.0..3.0f64).prop_map(|(c, beta)| CoefficientFn::Power { c, beta }),
        (0.0..5.0f64, 0.0..5.0f64).prop_map(|(c0, c1)| CoefficientFn::Affine { c0, c1 }),
        (0.0..5.0f64, 0.1..100.0f64).prop_map(|(c, k)| CoefficientFn::Logistic { c, k }),
        proptest::collection::vec((0.01..1.0f64, 0.0..5.0f64), 1..6).prop_map(|steps| {
            let mut x = 0.0;
            let (xs, ys) = steps
                .into_iter()
                .map(|(dx, y)| {
                    x += dx;
                    (x, y)
                })
                .unzip();
            CoefficientFn::Table { xs, ys }
        }),
    ]
}

fn jump_measure() -> impl Strategy<Value = JumpMeasure> {
    prop_oneof![
        Just(JumpMeasure::Zero),
        proptest::collection::vec((0.01..10.0f64, 0.0..3.0f64), 1..5).prop_map(|points| JumpMeasure::Atoms { points }),
        (0.0..5.0f64, 0.1..5.0f64).prop_map(|(mass, lambda)| JumpMeasure::Exponential { mass, lambda }),
        (0.0..5.0f64, 0.5..4.0f64, 0.01..1.0f64).prop_map(|(mass, exponent, z_min)| JumpMeasure::TruncatedPower {
            mass,
            exponent,
            z_min,
            z_max: z_min * 50.0,
        }),
    ]
}

fn kernel() -> impl Strategy<Value = FragmentationKernel> {
    prop_oneof![
        (1e-3..=1.0f64).prop_map(|theta| FragmentationKernel::Atom { theta }),
        (1e-3..=1.0f64, 1e-3..=1.0f64, 0.05..0.95f64)
            .prop_map(|(a, b, w)| FragmentationKernel::Discrete { atoms: vec![(a, w), (b, 1.0 - w)] }),
        Just(FragmentationKernel::Uniform),
        (0.1..5.0f64, 0.1..5.0f64).prop_map(|(alpha, beta)| FragmentationKernel::Beta { alpha, beta }),
    ]
}

fn config() -> impl Strategy<Value = ModelConfig> {
    (coefficient(), coefficient(), coefficient(), coefficient(), jump_measure(), kernel())
        .prop_map(|(g, sigma2, p, r, pi, kappa)| ModelConfig { g, sigma2, p, r, pi, kappa })
}

proptest! {
    #[test]
    fn toml_round_trip_is_exact(cfg in config()) {
        let Ok(m) = build_model(cfg.clone()) else {
            return Err(TestCaseError::reject("family constraints"));
        };
        let text = m.to_toml();
        let back = ModelSpec::from_toml(&text).unwrap();
        prop_assert_eq!(back.config(), &cfg);
        prop_assert_eq!(back.digest(), m.digest());
        prop_assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn kernel_moment_is_non_increasing(k in kernel()) {
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let u = 0.25 * i as f64;
            let v = k.moment(u).unwrap();
            prop_assert!(v <= prev * (1.0 + 1e-12), "moment({u}) = {v} > {prev}");
            prev = v;
        }
    }
}

#[test]
fn kernel_atom_outside_unit_interval_is_rejected() {
    let mut cfg = ModelConfig::zero();
    cfg.kappa = FragmentationKernel::Atom { theta: 1.5 };
    let err = build_model(cfg).unwrap_err().to_string();
    assert!(err.contains("model.kappa.theta"), "{err}");
}

#[test]
fn unknown_family_field_is_a_syntax_error() {
    let text = "g = { family = \"linear\", c = 1.0, d = 2.0 }\nsigma2 = { family = \"zero\" }\np = { family = \"zero\" }\nr = { family = \"zero\" }\npi = { family = \"zero\" }\nkappa = { family = \"uniform\" }\n";
    assert!(ModelSpec::from_toml(text).is_err());
}
