//! Property tests for the persistence and fitting invariants.

use std::sync::Arc;

use proptest::prelude::*;

use fraclab_core::{RadialField, RadialGrid, TailModel};

fn arb_grid() -> impl Strategy<Value = Arc<RadialGrid>> {
    (0.005f64..0.05, 1.02f64..1.2, 5.0f64..80.0).prop_map(|(h0, ratio, r_max)| {
        Arc::new(RadialGrid::geometric(r_max, h0, ratio, 2).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn csv_round_trip_is_lossless(
        grid in arb_grid(),
        amp in 0.1f64..10.0,
        width in 0.1f64..5.0,
        tail_a in 0.0f64..3.0,
        tail_p in 0.5f64..6.0,
    ) {
        let field = RadialField::from_fn(
            grid,
            |r| amp * (-r * r / (2.0 * width * width)).exp(),
            TailModel::PowerLaw { amplitude: tail_a, exponent: tail_p },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("field");
        field.save(&base).unwrap();
        let loaded = RadialField::load(&base).unwrap();
        prop_assert_eq!(field.values(), loaded.values());
        prop_assert_eq!(field.grid().nodes(), loaded.grid().nodes());
        prop_assert_eq!(field.tail(), loaded.tail());
        // a second save produces identical bytes
        let base2 = dir.path().join("field2");
        loaded.save(&base2).unwrap();
        prop_assert_eq!(
            std::fs::read(base.with_extension("csv")).unwrap(),
            std::fs::read(base2.with_extension("csv")).unwrap()
        );
    }

    #[test]
    fn fit_tail_recovers_exact_power_laws(
        amp in 0.01f64..100.0,
        p in 0.2f64..8.0,
    ) {
        let grid = Arc::new(RadialGrid::geometric(100.0, 0.01, 1.05, 2).unwrap());
        let field = RadialField::from_fn(
            grid.clone(),
            |r| amp * r.max(1e-12).powf(-p),
            TailModel::PowerLaw { amplitude: amp, exponent: p },
        )
        .unwrap();
        let window = grid.window_indices(5.0, 90.0);
        match field.fit_tail(window).unwrap() {
            TailModel::PowerLaw { amplitude, exponent } => {
                prop_assert!((amplitude - amp).abs() <= 1e-6 * amp);
                prop_assert!((exponent - p).abs() <= 1e-6 * p.max(1.0));
            }
            _ => prop_assert!(false, "expected a power law"),
        }
    }

    #[test]
    fn interpolation_stays_within_data_range(
        grid in arb_grid(),
        decay in 0.05f64..2.0,
    ) {
        // Monotone data: the interpolant must not overshoot the node values.
        let field = RadialField::from_fn(
            grid.clone(),
            |r| (1.0 + decay * r * r).powf(-1.3),
            TailModel::ZeroOutside { cutoff: grid.outer_radius() },
        )
        .unwrap();
        let r_max = grid.outer_radius();
        let mut r = 0.0;
        while r < r_max {
            let v = fraclab_core::RadialFn::eval(&field, r);
            prop_assert!(v > 0.0 && v <= 1.0 + 1e-15, "overshoot at {}: {}", r, v);
            r += r_max / 997.0;
        }
    }
}
