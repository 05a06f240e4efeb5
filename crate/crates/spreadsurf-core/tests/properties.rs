//! Property tests for the function-space kernel and serialization.

use proptest::prelude::*;
use spreadsurf_core::{hb_norm, HbSurface, SurfaceGrid, SurfaceJson};

fn grid() -> SurfaceGrid {
    SurfaceGrid::new(3.0, 48, 10, 0.5, 1.0).unwrap()
}

/// Smooth random surfaces from a handful of decaying modes, driven by
/// proptest so shrinking still produces valid cases.
fn surface_strategy() -> impl Strategy<Value = HbSurface> {
    (
        -1.0f64..1.0,
        proptest::collection::vec((-0.5f64..0.5, 0.8f64..2.5, 0u8..4), 1..5),
    )
        .prop_map(|(a0, modes)| {
            HbSurface::from_fn(grid(), move |xi, eta| {
                let mut v = a0;
                for (a, lam, q) in &modes {
                    v += a * (-lam * xi).exp() * (*q as f64 * std::f64::consts::PI * eta).cos();
                }
                v
            })
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn norm_is_absolutely_homogeneous(h in surface_strategy(), a in -8.0f64..8.0) {
        let n = hb_norm(&h, 0.5).unwrap().total;
        let na = hb_norm(&h.scale(a), 0.5).unwrap().total;
        prop_assert!((na - a.abs() * n).abs() <= 1e-12 * (1.0 + n));
    }

    #[test]
    fn norm_triangle_inequality(h in surface_strategy(), g in surface_strategy()) {
        let n_sum = hb_norm(&h.add(&g).unwrap(), 0.5).unwrap().total;
        let n_h = hb_norm(&h, 0.5).unwrap().total;
        let n_g = hb_norm(&g, 0.5).unwrap().total;
        prop_assert!(n_sum <= n_h + n_g + 1e-12);
    }

    #[test]
    fn norm_is_monotone_in_the_weight_exponent(h in surface_strategy()) {
        // beta < beta': every weighted term only grows.
        let lo = hb_norm(&h, 0.5).unwrap().total;
        let hi = hb_norm(&h, 1.0).unwrap().total;
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn breakdown_total_squares_to_component_sum(h in surface_strategy()) {
        let b = hb_norm(&h, 0.7).unwrap();
        let total_sq = b.total * b.total;
        prop_assert!((total_sq - b.sum_of_terms()).abs() <= 8.0 * f64::EPSILON * total_sq.max(1.0));
    }

    #[test]
    fn csv_round_trip_is_exact(h in surface_strategy()) {
        let back = HbSurface::from_csv(*h.grid(), &h.to_csv()).unwrap();
        prop_assert_eq!(back, h);
    }

    #[test]
    fn json_round_trip_is_exact(h in surface_strategy()) {
        let text = serde_json::to_string(&h.to_json()).unwrap();
        let parsed: SurfaceJson = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(HbSurface::from_json(&parsed).unwrap(), h);
    }

    #[test]
    fn shift_semigroup_law_is_exact_on_the_lattice(
        h in surface_strategy(),
        s in 0usize..20,
        t in 0usize..20,
    ) {
        let a = h.shift_steps(s).shift_steps(t);
        let b = h.shift_steps(s + t);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn integral_operator_is_linear(
        h in surface_strategy(),
        g in surface_strategy(),
        a in -4.0f64..4.0,
        b in -4.0f64..4.0,
    ) {
        let combo = h.scale(a).axpy(b, &g).unwrap().integral_op();
        let parts = h.integral_op().scale(a).axpy(b, &g.integral_op()).unwrap();
        let scale = combo.max_abs().max(1.0);
        prop_assert!(combo.sub(&parts).unwrap().max_abs() <= 1e-12 * scale);
    }

    #[test]
    fn tranche_payout_is_bounded_and_monotone(
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
        x1 in 0.0f64..0.5,
        width in 0.0f64..0.5,
    ) {
        use spreadsurf_core::tranche_payout;
        let x2 = x1 + width;
        let h = tranche_payout(x, x1, x2);
        prop_assert!((0.0..=width + 1e-15).contains(&h));
        if x <= y {
            prop_assert!(tranche_payout(y, x1, x2) <= h + 1e-15);
        }
    }
}

#[test]
fn shift_is_norm_continuous_at_zero() {
    let g = SurfaceGrid::new(3.0, 192, 10, 0.5, 1.0).unwrap();
    let h = HbSurface::from_fn(g, |xi, eta| (-1.2 * xi).exp() * (1.0 + 0.3 * eta)).unwrap();
    let dx = g.dx();
    let dev = |steps: usize| {
        hb_norm(&h.shift_steps(steps).sub(&h).unwrap(), g.beta)
            .unwrap()
            .total
    };
    let devs: Vec<f64> = [16usize, 8, 4, 2, 1].iter().map(|s| dev(*s)).collect();
    for w in devs.windows(2) {
        assert!(w[1] < w[0], "shift deviation not decreasing: {devs:?}");
    }
    // Linear in t for a smooth surface: one step deviates O(dx).
    assert!(devs[4] < 4.0 * dx, "one-step deviation {} too large", devs[4]);
}
