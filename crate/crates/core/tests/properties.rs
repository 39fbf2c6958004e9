use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use riemap_core::randomized::{
    derivative_residual, metric_compatibility_residual, normality_residual, random_expression, random_metric,
    random_riemannian_map, rk4_order_factor, sff_symmetry_residual, shape_operator_residuals, tension_residual,
};

fn config() -> Config {
    Config { cases: 200, rng_seed: RngSeed::Fixed(0x5eed_2024), failure_persistence: None, ..Config::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn sff_is_symmetric_and_normal(seed in any::<u64>()) {
        let rm = random_riemannian_map(seed).unwrap();
        for p in &rm.points {
            let sym = sff_symmetry_residual(&rm.map, p).unwrap();
            let nor = normality_residual(&rm.map, p).unwrap();
            prop_assert!(sym < 1e-9, "symmetry {sym} at {p:?}");
            prop_assert!(nor < 1e-9, "normality {nor} at {p:?}");
        }
    }

    #[test]
    fn shape_operator_is_dual_and_self_adjoint(seed in any::<u64>()) {
        let rm = random_riemannian_map(seed).unwrap();
        for p in &rm.points {
            let (duality, adjoint) = shape_operator_residuals(&rm.map, p).unwrap();
            prop_assert!(duality < 1e-8, "duality {duality} at {p:?}");
            prop_assert!(adjoint < 1e-8, "self-adjointness {adjoint} at {p:?}");
        }
    }

    #[test]
    fn tension_routes_agree(seed in any::<u64>()) {
        let rm = random_riemannian_map(seed).unwrap();
        for p in &rm.points {
            let r = tension_residual(&rm.map, p).unwrap();
            prop_assert!(r < 1e-8, "tension gap {r} at {p:?}");
        }
    }

    #[test]
    fn christoffel_is_metric_compatible(seed in any::<u64>(), dim in 2usize..=4) {
        let rm = random_metric(seed, dim).unwrap();
        for p in &rm.points {
            let r = metric_compatibility_residual(&rm.manifold, p).unwrap();
            prop_assert!(r < 1e-9, "compatibility {r} at {p:?}");
        }
    }

    #[test]
    fn rk4_converges_at_fourth_order(
        seed in any::<u64>(),
        dim in 2usize..=3,
        v in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let rm = random_metric(seed, dim).unwrap();
        let mut v0 = v[..dim].to_vec();
        v0[0] += if v0[0] >= 0.0 { 0.5 } else { -0.5 };
        let f = rk4_order_factor(&rm.manifold, &rm.points[0], &v0, 1.0, 0.1).unwrap();
        prop_assert!((12.0..=20.0).contains(&f), "order factor {f}");
    }

    #[test]
    fn symbolic_derivatives_match_differences(
        seed in any::<u64>(),
        vars in 1usize..=3,
        depth in 1usize..=5,
        p in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let e = random_expression(seed, vars, depth);
        let r = derivative_residual(&e, &p[..vars]).unwrap();
        prop_assert!(r < 1e-6, "relative gap {r} for {e:?} at {p:?}");
    }
}
