use lif_core::optimize::{maximize, OptimizerConfig};
use lif_core::Result;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn stays_feasible_and_monotone(
        c in proptest::collection::vec(-5.0f64..15.0, 2),
        w in proptest::collection::vec(0.1f64..20.0, 2),
        x0 in proptest::collection::vec(0.0f64..10.0, 2),
    ) {
        let cfg = OptimizerConfig::with_bounds(vec![(0.0, 10.0), (0.0, 10.0)]);
        let f = |x: &[f64]| -> Result<f64> {
            Ok(-(0..2).map(|i| w[i] * (x[i] - c[i]).powi(2)).sum::<f64>())
        };
        let out = maximize(f, &x0, &cfg).unwrap();
        for (i, &xi) in out.x.iter().enumerate() {
            prop_assert!((0.0..=10.0).contains(&xi));
            let target = c[i].clamp(0.0, 10.0);
            prop_assert!((xi - target).abs() < 1e-2, "coordinate {} at {} vs {}", i, xi, target);
            prop_assert_eq!(out.bound_active[i], xi == 0.0 || xi == 10.0);
        }
        prop_assert!(out.trace.windows(2).all(|p| p[1] >= p[0]));
        prop_assert!(out.iterations <= cfg.max_iter);
    }
}

#[test]
fn rosenbrock_like_valley() {
    let cfg = OptimizerConfig { max_iter: 200, rel_tol: 1e-12, ..OptimizerConfig::with_bounds(vec![(-2.0, 2.0), (-2.0, 2.0)]) };
    let f = |x: &[f64]| -> Result<f64> { Ok(-((1.0 - x[0]).powi(2) + 10.0 * (x[1] - x[0] * x[0]).powi(2))) };
    let out = maximize(f, &[-1.0, 1.5], &cfg).unwrap();
    assert!((out.x[0] - 1.0).abs() < 1e-2 && (out.x[1] - 1.0).abs() < 2e-2, "{out:?}");
}
