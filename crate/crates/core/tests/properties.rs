use num_complex::Complex64;
use proptest::prelude::*;

use singlab::czd::{cz_decompose, verify_cz};
use singlab::grid::{lebesgue_norm, transform_pair, Direction, GridFunction, GridSpec};
use singlab::microlocal::{admissible_parameters, AdmissibilityParams};
use singlab::probe::weak_ratio;

fn grid_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![3 => -4.0..4.0f64, 1 => -200.0..200.0f64], n * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cz_invariants_hold(values in grid_values(16), factor in 1.5..40.0f64) {
        let spec = GridSpec::new(2, 16, 1.0).unwrap();
        let f = GridFunction::new(spec, values.iter().map(|&v| Complex64::new(v, 0.0)).collect()).unwrap();
        let mean = lebesgue_norm(&f, 1.0) / 4.0;
        prop_assume!(mean > 0.0);
        let t = mean * factor;
        let report = verify_cz(&cz_decompose(&f, t, 2.0).unwrap(), &f, t);
        prop_assert!(report.all_pass, "{:?}", report.reconstruction);
    }

    #[test]
    fn transform_round_trip(values in grid_values(8), half_width in 0.1..10.0f64) {
        let spec = GridSpec::new(2, 8, half_width).unwrap();
        let u = GridFunction::new(spec, values.iter().map(|&v| Complex64::new(v, -v / 3.0)).collect()).unwrap();
        let back = transform_pair(&transform_pair(&u, Direction::Forward), Direction::Inverse);
        let err = lebesgue_norm(&back.sub(&u).unwrap(), 2.0);
        prop_assert!(err <= 1e-12 * lebesgue_norm(&u, 2.0).max(1e-300));
    }

    #[test]
    fn weak_ratio_never_exceeds_l1_ratio(values in grid_values(8), f_l1 in 0.1..10.0f64) {
        let spec = GridSpec::new(2, 8, 1.0).unwrap();
        let u = GridFunction::new(spec, values.iter().map(|&v| Complex64::new(v, 0.0)).collect()).unwrap();
        let sup = lebesgue_norm(&u, f64::INFINITY);
        prop_assume!(sup > 0.0);
        let lambdas: Vec<f64> = (1..=16).map(|k| sup * k as f64 / 17.0).collect();
        let r = weak_ratio(&u, f_l1, &lambdas, None).unwrap();
        prop_assert!(r.weak_ratio <= r.l1_ratio * (1.0 + 1e-12));
        prop_assert!(r.is_monotone());
    }

    #[test]
    fn exponents_are_affine_in_each_parameter(
        gamma in 0.0..0.5f64, iota in 0.0..0.1f64, eps0 in 0.0..1.0f64, mu in 0.0..0.1f64, n1 in 1u32..50, d in 2usize..6
    ) {
        let p = AdmissibilityParams { d, delta: 1.0, gamma, iota, eps0, mu, n1 };
        let v = admissible_parameters(&p);
        let big_d = (d / 2 + 1) as f64;
        let dm1 = d as f64 - 1.0;
        let tol = 1e-12;
        prop_assert!((v.s1 - (mu + gamma * dm1 + gamma * big_d - 1.0 + eps0 + iota)).abs() < tol);
        prop_assert!((v.s2 - (mu + gamma * dm1 + gamma * big_d - 1.0 + iota)).abs() < tol);
        prop_assert!((v.s3 - (mu + gamma * dm1 + gamma * big_d - 1.0 + iota)).abs() < tol);
        let n1 = f64::from(n1);
        prop_assert!((v.s4 - (-eps0 * n1 + gamma * n1 + 2.0 * big_d * gamma + iota)).abs() < tol);
        prop_assert_eq!(v.admissible, v.s1.max(v.s2).max(v.s3).max(v.s4) < 0.0);
    }
}
