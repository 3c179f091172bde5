mod common;

use common::{routing_residual, RoutingInstance};
use edgeplace::model::DelayMatrix;
use edgeplace::routing::oracle::brute_force_routing;
use edgeplace::routing::{solve_routing, total_delay, RoutingStatus};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> RoutingInstance {
    RoutingInstance::random(&mut ChaCha8Rng::seed_from_u64(seed), 4, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn solver_is_never_worse_than_the_oracle(seed in any::<u64>()) {
        let inst = instance(seed);
        let sol = solve_routing(&inst.problem());
        let oracle = brute_force_routing(&inst.problem(), 4).unwrap();
        prop_assert_eq!(sol.status, oracle.status);
        if sol.status == RoutingStatus::Optimal {
            prop_assert!(sol.objective_delay <= oracle.objective_delay + 1e-6);
        }
    }

    #[test]
    fn feasible_routes_satisfy_every_constraint(seed in any::<u64>()) {
        let inst = instance(seed);
        let sol = solve_routing(&inst.problem());
        if sol.status == RoutingStatus::Optimal {
            prop_assert!(routing_residual(&inst, &sol.routing) <= 1e-9);
            // exact zeros outside the placement
            for i in 0..inst.n() {
                for j in (0..inst.n()).filter(|j| !inst.chosen.contains(j)) {
                    prop_assert_eq!(sol.routing.get(i, j), 0.0);
                }
            }
            let recomputed = total_delay(&sol.routing, &inst.workload, &inst.delays);
            prop_assert!((recomputed - sol.objective_delay).abs() <= 1e-9 * recomputed.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solver_is_deterministic(seed in any::<u64>()) {
        let inst = instance(seed);
        prop_assert_eq!(solve_routing(&inst.problem()), solve_routing(&inst.problem()));
    }

    #[test]
    fn scaling_delays_scales_the_objective_only(seed in any::<u64>(), scale in prop::sample::select(vec![0.5, 2.0, 3.0, 4.0])) {
        let inst = instance(seed);
        let scaled = RoutingInstance {
            delays: DelayMatrix::from_rows(
                &inst.delays.rows().iter().map(|r| r.iter().map(|d| d * scale).collect()).collect::<Vec<_>>(),
            ).unwrap(),
            ..inst.clone()
        };
        let a = solve_routing(&inst.problem());
        let b = solve_routing(&scaled.problem());
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(&a.routing, &b.routing);
        prop_assert!((b.objective_delay - scale * a.objective_delay).abs() <= 1e-9 * b.objective_delay.abs().max(1.0));
    }
}

#[test]
fn equal_delays_prefer_the_lower_destination_index() {
    let inst = RoutingInstance {
        chosen: vec![1, 2],
        workload: vec![10.0, 0.0, 0.0],
        delays: DelayMatrix::from_rows(&[vec![0.0, 5.0, 5.0], vec![5.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]]).unwrap(),
        available: vec![50.0; 3],
        cores: vec![1.0; 3],
    };
    let sol = solve_routing(&inst.problem());
    assert_eq!(sol.routing.get(0, 1), 1.0);
    assert_eq!(sol.routing.get(0, 2), 0.0);
    assert_eq!(sol.objective_delay, 50.0);
}

#[test]
fn capacity_split_matches_the_hand_value() {
    // node 1 caps its share at 6 req/s, the remaining 4 take the 5 ms link
    let inst = RoutingInstance {
        chosen: vec![1, 2],
        workload: vec![10.0, 0.0, 0.0],
        delays: DelayMatrix::from_rows(&[vec![0.0, 2.0, 5.0], vec![2.0, 0.0, 3.0], vec![5.0, 3.0, 0.0]]).unwrap(),
        available: vec![0.0 + 1.0, 6.0, 20.0],
        cores: vec![1.0; 3],
    };
    let sol = solve_routing(&inst.problem());
    assert!((sol.routing.get(0, 1) - 0.6).abs() < 1e-12);
    assert!((sol.routing.get(0, 2) - 0.4).abs() < 1e-12);
    assert!((sol.objective_delay - 32.0).abs() < 1e-9);
}
