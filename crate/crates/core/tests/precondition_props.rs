use lif_core::lattice::build_perturbed_lattice;
use lif_core::precondition::{
    laplacian_precondition_regular, monomials, neighborhood_size, precondition_all, solve_stencil,
};
use lif_core::Error;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn unit_norm_and_annihilation(
        dim in 1usize..=3,
        m in 1usize..=3,
        delta in prop_oneof![Just(0.0), 0.1f64..3.0],
        seed in any::<u64>(),
    ) {
        let per_axis = match dim { 1 => 40, 2 => 9, _ => 5 };
        let lat = build_perturbed_lattice(per_axis, dim, 5.0, delta, seed).unwrap();
        let pc = precondition_all(&lat, m, 0.5).unwrap();
        prop_assert_eq!(pc.len(), lat.len());
        for s in 0..lat.len() {
            let (nb, c) = pc.site(s);
            prop_assert_eq!(nb[0], s);
            prop_assert!(nb.len() <= 2 * neighborhood_size(m, dim).unwrap());
            let norm: f64 = c.iter().map(|a| a * a).sum();
            prop_assert!((norm - 1.0).abs() <= 1e-12);
            prop_assert!(pc.moment_residual(&lat, s) <= 1e-8, "site {} residual {}", s, pc.moment_residual(&lat, s));
        }
    }

    #[test]
    fn filtering_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let lat = build_perturbed_lattice(8, 2, 5.0, 1.0, seed).unwrap();
        let pc = precondition_all(&lat, 2, 0.5).unwrap();
        let u: Vec<f64> = (0..lat.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let v: Vec<f64> = (0..lat.len()).map(|i| (i as f64 * 1.3).cos()).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + alpha * b).collect();
        let (yu, yv, yw) = (pc.apply(&u).unwrap(), pc.apply(&v).unwrap(), pc.apply(&w).unwrap());
        for i in 0..lat.len() {
            let want = yu.values[i] + alpha * yv.values[i];
            prop_assert!((yw.values[i] - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }
}

#[test]
fn polynomials_are_filtered_out() {
    let lat = build_perturbed_lattice(10, 2, 5.0, 1.0, 17).unwrap();
    let pc = precondition_all(&lat, 2, 0.5).unwrap();
    let quad: Vec<f64> = lat.points().map(|p| 3.0 - p[0] + 2.0 * p[1] + p[0] * p[1] - 0.5 * p[1] * p[1]).collect();
    let y = pc.apply(&quad).unwrap();
    assert!(y.values.iter().all(|v| v.abs() < 1e-8), "{:?}", &y.values[..5]);
}

#[test]
fn neighborhood_sizes() {
    assert_eq!(neighborhood_size(2, 2).unwrap(), 7);
    assert_eq!(neighborhood_size(3, 2).unwrap(), 11);
    assert_eq!(neighborhood_size(1, 1).unwrap(), 3);
    assert_eq!(monomials(2, 2).len(), 6);
    assert_eq!(monomials(2, 3).len(), 10);
}

#[test]
fn one_dimensional_stencils() {
    // Neighbors at -1 and 1: the second difference, center positive.
    let a = solve_stencil(&[-1.0, 1.0], 1, 1).unwrap();
    let s = 6f64.sqrt();
    for (got, want) in a.iter().zip([2.0 / s, -1.0 / s, -1.0 / s]) {
        assert!((got - want).abs() < 1e-14);
    }
    // One-sided neighbors give the forward difference; repeated offsets are
    // singular.
    let b = solve_stencil(&[1.0, 2.0], 1, 1).unwrap();
    assert!((b[0] - 1.0 / 6f64.sqrt()).abs() < 1e-14 && (b[1] + 2.0 / 6f64.sqrt()).abs() < 1e-14);
    assert!(solve_stencil(&[1.0, 1.0], 1, 1).is_none());
}

#[test]
fn laplacian_matches_solved_filters_on_a_regular_line() {
    // In one dimension the m-th order filter on 2k+1 consecutive points is a
    // multiple of the k-fold Laplacian: m = 1 for k = 1, m = 3 for k = 2.
    let per_axis = 30;
    let lat = build_perturbed_lattice(per_axis, 1, 5.0, 0.0, 0).unwrap();
    let raw: Vec<f64> = lat.points().map(|p| (1.7 * p[0]).sin() + 0.3 * p[0].powi(2)).collect();
    for (k, m) in [(1, 1), (2, 3)] {
        let lap = laplacian_precondition_regular(&raw, per_axis, 1, k, 0.5).unwrap();
        let y = precondition_all(&lat, m, 0.5).unwrap().apply(&raw).unwrap();
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        for (&s, &v) in lap.sites.iter().zip(&lap.values) {
            assert!((v - sign * y.values[s]).abs() < 1e-9 * (1.0 + v.abs()), "k={k} site {s}");
        }
    }
}

#[test]
fn laplacian_rejects_small_grids() {
    let raw = vec![0.0; 9];
    assert!(matches!(
        laplacian_precondition_regular(&raw, 3, 2, 2, 0.5),
        Err(Error::GridTooSmall { .. })
    ));
}

#[test]
fn too_few_sites_is_an_error() {
    let lat = build_perturbed_lattice(2, 2, 1.0, 0.0, 0).unwrap();
    assert!(matches!(precondition_all(&lat, 2, 0.5), Err(Error::TooFewSites { .. })));
}
