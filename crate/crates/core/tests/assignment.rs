mod common;

use common::exhaustive_assignment as exhaustive;
use proptest::prelude::*;
use radiomap::assignment::{assignment_cost, hungarian};

fn square() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=6).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(-50.0f64..50.0, n), n))
}

proptest! {
    #[test]
    fn optimal_on_square_matrices(cost in square()) {
        let a = hungarian(&cost);
        let mut seen = a.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..cost.len()).collect::<Vec<_>>());
        prop_assert!((assignment_cost(&cost, &a) - exhaustive(&cost)).abs() < 1e-9);
    }

    #[test]
    fn integer_costs_with_ties(cost in (1usize..=6).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0u8..3, n), n))) {
        let cost: Vec<Vec<f64>> = cost.iter().map(|r| r.iter().map(|&c| c as f64).collect()).collect();
        let a = hungarian(&cost);
        prop_assert_eq!(assignment_cost(&cost, &a), exhaustive(&cost));
    }

    #[test]
    fn rectangular_uses_distinct_columns(n in 1usize..4, extra in 0usize..3, seed in any::<u64>()) {
        let m = n + extra;
        let mut s = seed;
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 40) as f64 }).collect())
            .collect();
        let a = hungarian(&cost);
        let mut cols = a.clone();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(cols.len(), n);
        // padding to square with zero rows must not change the optimum
        let mut padded = cost.clone();
        padded.extend((n..m).map(|_| vec![0.0; m]));
        prop_assert!((assignment_cost(&cost, &a) - exhaustive(&padded)).abs() < 1e-6);
    }
}
