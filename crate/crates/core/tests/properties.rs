use approx::assert_relative_eq;
use nspike_core::normalform::preconditioner_ratio;
use nspike_core::UniformGrid;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trip(values in prop::collection::vec(-10.0f64..10.0, 64)) {
        let grid = UniformGrid::new(1, 7.5, 64).unwrap();
        let back = grid.inverse_real(&grid.forward_real(&values));
        for (a, b) in values.iter().zip(&back) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn preconditioner_ratio_below_eps_squared(
        values in prop::collection::vec(-1.0f64..1.0, 128),
        eps in 0.01f64..0.5,
        ell in 2u32..5,
    ) {
        let grid = UniformGrid::new(1, 20.0, 128).unwrap();
        prop_assume!(values.iter().any(|v| v.abs() > 1e-6));
        prop_assert!(preconditioner_ratio(eps, &grid, &values, ell) <= eps * eps);
    }

    #[test]
    fn parseval_up_to_grid_volume(values in prop::collection::vec(-3.0f64..3.0, 16 * 16)) {
        let grid = UniformGrid::new(2, 4.0, 16).unwrap();
        let h2 = grid.spacing().powi(2);
        let direct = (values.iter().map(|v| v * v).sum::<f64>() * h2).sqrt();
        assert_relative_eq!(grid.sobolev_norm_scalar(&values, 0), direct, max_relative = 1e-10);
    }
}
