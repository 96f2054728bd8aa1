use proptest::prelude::*;

use refraction::config::RunConfig;
use refraction::model::{CoefficientSpec, ModelSpec};
use refraction::optimizer::{solve, Numerics, Regime};
use refraction::simulate::{simulate_refraction, SimConfig};
use refraction::specfun::{kummer_m_integral_scaled, kummer_m_scaled, tricomi_u_scaled};

fn sigma() -> impl Strategy<Value = CoefficientSpec> {
    prop_oneof![
        (0.2..0.8f64).prop_map(|s0| CoefficientSpec::Constant { s0 }),
        (0.2..0.6f64, 0.0..0.6f64).prop_map(|(c0, c1)| CoefficientSpec::Affine { c0, c1 }),
        (0.05..0.8f64, 0.0..0.6f64).prop_map(|(s0, s1)| CoefficientSpec::SqrtAffine { s0, s1 }),
    ]
}

fn model() -> impl Strategy<Value = ModelSpec> {
    let affine = (0.02..0.3f64, 0.0..0.25f64, sigma(), 0.0..1.0f64, 0.0..1.0f64, 0.05..0.3f64).prop_map(
        |(m0, m1, sigma, f0, f1, gap)| ModelSpec::affine((m0, m1), sigma, (f0, f1), m1 + gap),
    );
    let logistic = (0.05..0.3f64, 0.1..0.3f64, 3.0..12.0f64, sigma(), 0.0..1.0f64, 0.0..1.0f64, 0.05..0.3f64)
        .prop_map(|(m0, m1, k, sigma, f0, f1, gap)| ModelSpec {
            mu: CoefficientSpec::Logistic { m0, m1, k },
            sigma,
            bound: CoefficientSpec::Affine { c0: f0, c1: f1 },
            q: m1 + gap,
        });
    prop_oneof![affine, logistic]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn resolvent_and_barrier_invariants(spec in model()) {
        let s = solve(&spec, &Numerics::default()).unwrap();
        let c = s.resolvent.checks;
        prop_assert!(c.slope_min >= -1e-9, "slope_min {}", c.slope_min);
        prop_assert!(c.slope_max <= 1.0 + 1e-9, "slope_max {}", c.slope_max);
        prop_assert!(c.concavity_defect <= 1e-7, "concavity {}", c.concavity_defect);
        prop_assert!(c.envelope_excess <= 1e-9, "envelope {}", c.envelope_excess);
        prop_assert!(s.b_star >= 0.0 && s.b_star <= s.b_hat + 1e-12, "b* {} b^ {}", s.b_star, s.b_hat);
        if s.regime == Regime::BarrierZero {
            prop_assert_eq!(s.b_star, 0.0);
        }
        prop_assert_eq!(s.value.values()[0], 0.0);
        prop_assert!(s.value.derivs().iter().all(|&d| d >= -1e-9));
    }

    #[test]
    fn config_round_trips(spec in model(), seed in 0..i64::MAX as u64, paths in 1usize..1_000_000) {
        let mut cfg = RunConfig::new(spec);
        cfg.sim.config.seed = seed;
        cfg.sim.config.n_paths = paths;
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn kummer_series_matches_integral(a in 0.1..5.0f64, gap in 0.1..5.0f64, z in -40.0..40.0f64) {
        let s = kummer_m_scaled(a, a + gap, z).unwrap();
        let i = kummer_m_integral_scaled(a, a + gap, z).unwrap();
        prop_assert!((s.ratio(&i) - 1.0).abs() <= 1e-9, "{} vs {}", s.value(), i.value());
    }

    #[test]
    fn tricomi_is_positive_and_decreasing(a in 0.05..6.0f64, b in -3.0..4.0f64, z in 0.05..60.0f64) {
        let u = tricomi_u_scaled(a, b, z).unwrap();
        let v = tricomi_u_scaled(a, b, z * 1.01).unwrap();
        prop_assert!(u.sign > 0.0 && v.sign > 0.0);
        prop_assert!(v.ln_abs < u.ln_abs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    #[test]
    fn simulation_is_deterministic_per_seed(seed in any::<u64>(), x0 in 0.1..2.0f64) {
        let spec = ModelSpec::affine((0.09, 0.21), CoefficientSpec::Constant { s0: 0.3 }, (0.3, 0.3), 0.33);
        let s = solve(&spec, &Numerics::default()).unwrap();
        let cfg = SimConfig { n_paths: 300, dt: 1e-2, t_max: Some(45.0), seed, x0, ..Default::default() };
        let a = simulate_refraction(&s.model, s.b_star, &cfg).unwrap();
        let b = simulate_refraction(&s.model, s.b_star, &cfg).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.mean > 0.0 && a.mean.is_finite());
    }
}
