//! Property tests for the structural invariants that hold for arbitrary
//! data, not just the named oracles.

use proptest::prelude::*;

use kflow_core::barrier::barrier_envelope;
use kflow_core::flow::{gradient_w_values, mollify, q_operator_values, RadialGrid};
use kflow_core::WarpedModel;

fn models() -> Vec<WarpedModel> {
    vec![
        WarpedModel::euclidean(2).unwrap(),
        WarpedModel::hyperbolic(2).unwrap(),
        WarpedModel::hyperbolic_product(3).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// W >= 1/rho pointwise, equality iff the gradient vanishes.
    #[test]
    fn w_dominates_inverse_rho(coeffs in prop::collection::vec(-1.0f64..1.0, 4)) {
        let grid = RadialGrid::new(1.0, 48).unwrap();
        for model in models() {
            let u: Vec<f64> = grid
                .nodes()
                .map(|r| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * r).cos())
                        .sum()
                })
                .collect();
            let w = gradient_w_values(&model, &grid, &u);
            for (r, wi) in grid.nodes().zip(&w) {
                let (rho, _, _) = model.rho(r);
                prop_assert!(*wi >= 1.0 / rho - 1e-14);
            }
        }
    }

    /// Q depends only on the gradient: adding a constant changes nothing.
    #[test]
    fn q_is_translation_invariant(shift in -10.0f64..10.0, amp in 0.01f64..0.5) {
        let grid = RadialGrid::new(1.0, 48).unwrap();
        let model = WarpedModel::hyperbolic(2).unwrap();
        let u: Vec<f64> = grid.nodes().map(|r| amp * (3.0 * r).cos()).collect();
        let shifted: Vec<f64> = u.iter().map(|v| v + shift).collect();
        let qa = q_operator_values(&model, &grid, &u, -0.2);
        let qb = q_operator_values(&model, &grid, &shifted, -0.2);
        for i in 0..grid.m - 1 {
            prop_assert!((qa[i] - qb[i]).abs() < 1e-10, "node {i}: {} vs {}", qa[i], qb[i]);
        }
    }

    /// Mollification moves Lipschitz data by at most L * width.
    #[test]
    fn mollify_respects_lipschitz_bound(
        kink in 0.2f64..0.8,
        slope in 0.2f64..3.0,
        width_cells in 4usize..24,
    ) {
        let grid = RadialGrid::new(1.0, 101).unwrap();
        let width = width_cells as f64 * grid.h;
        let u: Vec<f64> = grid.nodes().map(|r| slope * (r - kink).abs()).collect();
        let out = mollify(&grid, &u, width).unwrap();
        for (a, b) in u.iter().zip(&out) {
            prop_assert!((a - b).abs() <= slope * width + 1e-12);
        }
    }

    /// Envelope width identity:
    /// upper - lower = (sup u0 - inf u0) + 2 (v_{R(T)}(o) - v_{r0}(r)).
    #[test]
    fn envelope_width_identity(
        spread in 0.0f64..1.0,
        t_final in 0.01f64..2.0,
        r_frac in 0.0f64..1.0,
    ) {
        let model = WarpedModel::euclidean(2).unwrap();
        let r0 = 1.0;
        let r = r_frac * r0;
        let (lower, upper) =
            barrier_envelope(&model, r0, -0.1, t_final, spread, 0.0, r).unwrap();
        prop_assert!(upper - lower >= spread - 1e-12);
        // mirror symmetry: swapping sup/inf and negating mirrors the pair
        let (lo2, up2) =
            barrier_envelope(&model, r0, -0.1, t_final, 0.0, -spread, r).unwrap();
        prop_assert!((up2 - (upper - spread)).abs() < 1e-12);
        prop_assert!((lo2 - (lower - spread)).abs() < 1e-12);
    }
}
