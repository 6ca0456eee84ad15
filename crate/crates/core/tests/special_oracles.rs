use lif_core::special::{bessel_k, bessel_k_scaled, matern_correlation, Matern};

/// `K_ν(x) = ∫_0^∞ exp(-x cosh t) cosh(ν t) dt` by composite Simpson.
fn integral_oracle(nu: f64, x: f64) -> f64 {
    // The integrand is below e^{-x cosh T} beyond T; pick T so that is negligible.
    let upper = (60.0f64 / x + 1.0).acosh().max(1.0) + 2.0;
    let steps = 200_000;
    let h = upper / steps as f64;
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    let mut acc = f(0.0) + f(upper);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn bessel_matches_integral_representation() {
    for nu in [0.0, 0.3, 0.75, 1.0, 1.7, 2.2, 3.6] {
        for x in [0.05, 0.5, 1.0, 1.9, 2.0, 2.1, 7.0, 30.0] {
            let got = bessel_k(nu, x).unwrap();
            let want = integral_oracle(nu, x);
            assert!(((got - want) / want).abs() < 1e-10, "nu={nu} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn scaled_and_unscaled_agree() {
    for (nu, x) in [(0.4, 0.7), (1.3, 3.0), (2.5, 12.0)] {
        let k = bessel_k(nu, x).unwrap();
        let ks = bessel_k_scaled(nu, x).unwrap();
        assert!((ks * (-x).exp() - k).abs() <= 1e-15 * k);
    }
    // Far into the underflow region only the scaled form is meaningful.
    assert_eq!(bessel_k(1.2, 800.0).unwrap(), 0.0);
    assert!(bessel_k_scaled(1.2, 800.0).unwrap() > 0.0);
}

#[test]
fn continuous_across_method_switch() {
    for nu in [0.2, 0.9, 1.4, 2.8] {
        let below = bessel_k(nu, 2.0 - 1e-12).unwrap();
        let at = bessel_k(nu, 2.0).unwrap();
        assert!(((below - at) / at).abs() < 1e-10, "nu={nu}");
    }
}

#[test]
fn recurrence_holds() {
    // K_{ν+1}(x) = K_{ν-1}(x) + (2ν/x) K_ν(x)
    for nu in [1.2, 2.6, 4.1] {
        for x in [0.3, 1.5, 4.0] {
            let lhs = bessel_k(nu + 1.0, x).unwrap();
            let rhs = bessel_k(nu - 1.0, x).unwrap() + 2.0 * nu / x * bessel_k(nu, x).unwrap();
            assert!(((lhs - rhs) / lhs).abs() < 1e-12);
        }
    }
}

#[test]
fn matern_matches_definition() {
    for nu in [0.3, 1.0, 1.7, 3.2] {
        let m = Matern::new(nu).unwrap();
        for r in [1e-3f64, 0.2, 1.0, 5.0, 25.0] {
            let want = 2f64.powf(1.0 - nu) / libm::tgamma(nu) * r.powf(nu) * bessel_k(nu, r).unwrap();
            assert!(((m.eval(r) - want) / want).abs() < 1e-12, "nu={nu} r={r}");
        }
    }
    // Near zero the correlation approaches one.
    assert!((matern_correlation(1e-8, 1.3).unwrap() - 1.0).abs() < 1e-10);
    assert!(Matern::new(0.0).is_err());
}
