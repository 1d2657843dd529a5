mod common;

use proptest::prelude::*;

use smartgrid_coalition::dispatch::{build, decode, solve_problem, ProblemKind};
use smartgrid_coalition::lp::{check_feasible, solve_lp, Quantity, SolverOptions, VarKey};
use smartgrid_coalition::model::{DispatchSolution, Scenario};

use common::{residuals, scenario_strategy, synthetic_day, FOUR_PLUS_TWO};

const TOL: f64 = 1e-7;

fn solve(s: &Scenario, kind: ProblemKind) -> DispatchSolution {
    solve_problem(s, &kind, &SolverOptions::default()).unwrap_or_else(|e| panic!("{kind}: {e}"))
}

fn kinds(s: &Scenario) -> Vec<ProblemKind> {
    let members = s.members();
    let mut out: Vec<ProblemKind> = members
        .iter()
        .map(|&m| ProblemKind::Individual(m))
        .collect();
    out.push(ProblemKind::CoalitionalResEss(members.clone()));
    if !s.consumers().is_empty() {
        out.push(ProblemKind::Community(members));
    }
    out
}

fn reconciles(sol: &DispatchSolution) -> bool {
    let obj = sol.lp_objective;
    (obj - sol.aggregate.objective_equivalent()).abs() <= 1e-6 * (1.0 + obj.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_solution_reconciles_and_satisfies_all_constraint_families(s in scenario_strategy()) {
        for kind in kinds(&s) {
            let sol = solve(&s, kind.clone());
            prop_assert!(reconciles(&sol), "{kind}: {} vs {}", sol.lp_objective, sol.aggregate.objective_equivalent());
            let r = residuals(&s, &sol);
            prop_assert!(r.max() <= TOL, "{kind}: {r:?}");
        }
    }

    #[test]
    fn optimal_points_never_charge_and_discharge_at_once(s in scenario_strategy()) {
        let opts = SolverOptions::default();
        for kind in kinds(&s) {
            let lp = build(&s, &kind).unwrap();
            let raw = solve_lp(&lp, &opts).unwrap();
            let x = raw.x.clone().unwrap();
            prop_assert!(check_feasible(&lp, &x, TOL).unwrap().is_empty());
            let sol = decode(&s, &kind, &lp, &raw, opts.feas_tol).unwrap();
            let pi = s.prices.storage_cycle_price;
            for m in kind.members() {
                let split: f64 = (0..s.grid.slots)
                    .map(|t| {
                        let up = lp.var_names.column(&VarKey::new(m, Quantity::ChargeUp, t)).unwrap();
                        let down = lp.var_names.column(&VarKey::new(m, Quantity::ChargeDown, t)).unwrap();
                        pi * (x[up] + x[down])
                    })
                    .sum();
                let decoded = sol.household(m).unwrap().cost.storage_cost;
                prop_assert!((split - decoded).abs() <= 1e-9, "member {m}: {split} vs {decoded}");
            }
        }
    }

    #[test]
    fn pooling_never_raises_the_objective(s in scenario_strategy()) {
        let members = s.members();
        let alone: f64 = members.iter().map(|&m| solve(&s, ProblemKind::Individual(m)).lp_objective).sum();
        let coal = solve(&s, ProblemKind::CoalitionalResEss(members.clone())).lp_objective;
        prop_assert!(coal <= alone + 1e-6, "coalitional {coal} > individual {alone}");
        if !s.consumers().is_empty() {
            let comm = solve(&s, ProblemKind::Community(members)).lp_objective;
            prop_assert!(comm <= coal + 1e-6, "community {comm} > coalitional {coal}");
        }
    }

    #[test]
    fn a_singleton_coalition_is_the_individual_problem(s in scenario_strategy()) {
        let m = s.members()[0];
        let alone = solve(&s, ProblemKind::Individual(m));
        let coal = solve(&s, ProblemKind::CoalitionalResEss(vec![m]));
        prop_assert!((alone.lp_objective - coal.lp_objective).abs() <= 1e-9);
        prop_assert!((alone.aggregate.total - coal.aggregate.total).abs() <= 1e-7);
        prop_assert!(coal.households[0].exchange.iter().all(|a| a.abs() <= TOL));
    }

    #[test]
    fn consumers_never_pay_more_than_their_guaranteed_bill(s in scenario_strategy(), delta in 0.0f64..0.05) {
        prop_assume!(!s.consumers().is_empty());
        let mut s = s;
        s.prices.consumer_margin = delta;
        let kind = ProblemKind::Community(s.members());
        // A positive margin may be unattainable; the solver then reports it.
        if let Ok(sol) = solve_problem(&s, &kind, &SolverOptions::default()) {
            for h in sol.households.iter().filter(|h| !h.kind.is_member()) {
                let base = s.households[h.household].utility_only_cost(&s.tariff.grid_price);
                prop_assert!(h.cost.total <= base - delta + TOL, "{}: {} > {}", h.id, h.cost.total, base - delta);
                prop_assert!(h.exchange.iter().all(|&a| a <= TOL));
            }
            prop_assert!((sol.aggregate.purchase_revenue - sol.consumer_aggregate.purchase_cost).abs() <= 1e-9);
        } else {
            prop_assert!(delta > 0.0);
        }
    }
}

#[test]
fn synthetic_days_pass_every_audit() {
    for seed in 0..5 {
        let s = synthetic_day(seed, &FOUR_PLUS_TWO);
        for kind in kinds(&s) {
            let sol = solve(&s, kind.clone());
            assert!(reconciles(&sol), "seed {seed} {kind}");
            let r = residuals(&s, &sol);
            assert!(r.max() <= TOL, "seed {seed} {kind}: {r:?}");
        }
    }
}
