use proptest::prelude::*;

use safeset::oracle::literal_fixed_point;
use safeset::safety::{best_target, best_target_naive};
use safeset::{
    compute_safety_function, disturbance_support, DescentController, DisturbanceModel, Grid,
    Problem, RngStream, SolverOptions, UpdateStrategy,
};

fn small_problem() -> impl Strategy<Value = Problem<f64>> {
    (
        5usize..=25,
        prop_oneof![Just(3usize), Just(5)],
        2.0f64..6.0,
        0.01f64..0.2,
    )
        .prop_map(|(n, m, mu, xi0)| Problem::tent(mu, xi0, n, m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn support_is_symmetric(bound in 0.0f64..2.0, half in 1usize..60) {
        let m = 2 * half + 1;
        let s = disturbance_support(&DisturbanceModel::new(bound, m).unwrap());
        prop_assert_eq!(s.len(), m);
        prop_assert_eq!(s[0], -bound);
        prop_assert_eq!(s[m - 1], bound);
        prop_assert_eq!(s[half], 0.0);
        for k in 0..m {
            prop_assert_eq!(s[k], -s[m - 1 - k]);
        }
    }

    #[test]
    fn nearest_index_recovers_grid_points(lo in -5.0f64..5.0, width in 0.1f64..10.0, n in 2usize..3000) {
        let g = Grid::new(lo, lo + width, n).unwrap();
        for i in [0, n / 3, n / 2, n - 1] {
            prop_assert_eq!(g.nearest_index(g.point(i)), i);
        }
    }

    #[test]
    fn solver_matches_literal_oracle(p in small_problem()) {
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        let (reference, _) = literal_fixed_point(&p, 10_000).expect("oracle terminates");
        for (a, b) in reference.iter().zip(sf.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn envelope_equals_naive(p in small_problem()) {
        let naive = compute_safety_function(&p, SolverOptions { strategy: UpdateStrategy::Naive, ..Default::default() }).unwrap();
        let fast = compute_safety_function(&p, SolverOptions::default()).unwrap();
        prop_assert_eq!(naive.values(), fast.values());
        for x in [-0.7, -0.01, 0.0, 0.33, 0.5, 0.999, 1.0, 1.4] {
            prop_assert_eq!(best_target(&p.grid, fast.values(), x), best_target_naive(&p.grid, fast.values(), x));
        }
    }

    #[test]
    fn descent_decreases_cost(mu in 2.0f64..5.0, xi0 in 0.02f64..0.15, seed in any::<u64>()) {
        let n = 301;
        let m = 21;
        let p = Problem::tent(mu, xi0, n, m).unwrap();
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        let ctrl = DescentController::new(&sf);
        let slack = xi0 / (m as f64 - 1.0) + p.grid.spacing();
        let mut rng = RngStream::new(seed, 0);
        let mut q = p.grid.point(p.grid.nearest_index(0.16));
        for _ in 0..50 {
            let before = sf.value_near(q);
            let s = ctrl.step(&p, q, &mut rng);
            let after = s.control.abs().max(sf.value(s.index));
            prop_assert!(after <= before + slack, "{} > {} + {}", after, before, slack);
            q = s.next;
        }
    }
}
