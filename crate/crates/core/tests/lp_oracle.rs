mod common;

use proptest::prelude::*;
use smartgrid_coalition::lp::{check_feasible, solve_lp, LpStatus, SolverOptions};

use common::{random_bounded_lp, vertex_enumeration_min};

#[test]
fn vertex_enumeration_agrees_on_seeded_problems() {
    let options = SolverOptions::default();
    let mut optimal = 0;
    for seed in 1000..1300 {
        let lp = random_bounded_lp(seed);
        let oracle = vertex_enumeration_min(&lp, 1e-9);
        let sol = solve_lp(&lp, &options).unwrap();
        match oracle {
            Some(best) => {
                assert_eq!(sol.status, LpStatus::Optimal, "seed {seed}");
                let got = sol.objective_value.unwrap();
                assert!((got - best).abs() <= 1e-6, "seed {seed}: {got} vs {best}");
                optimal += 1;
            }
            None => assert_eq!(sol.status, LpStatus::Infeasible, "seed {seed}"),
        }
    }
    assert!(optimal > 100, "too few feasible samples: {optimal}");
}

proptest! {
    #[test]
    fn optimal_points_pass_the_audit(seed in any::<u64>()) {
        let lp = random_bounded_lp(seed);
        let sol = solve_lp(&lp, &SolverOptions::default()).unwrap();
        if let Some(x) = &sol.x {
            prop_assert!(check_feasible(&lp, x, 1e-7).unwrap().is_empty());
        }
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>()) {
        let lp = random_bounded_lp(seed);
        let a = solve_lp(&lp, &SolverOptions::default()).unwrap();
        let b = solve_lp(&lp, &SolverOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}
