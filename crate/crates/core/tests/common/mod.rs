//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smartgrid_coalition::lp::{SparseRow, StandardLp};

/// Minimum objective over all vertices of a bounded polytope, or `None` when
/// no vertex is feasible.
pub fn vertex_enumeration_min(lp: &StandardLp, tol: f64) -> Option<f64> {
    let n = lp.num_vars;
    // Every hyperplane as (dense row, rhs).
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    let dense = |row: &SparseRow| {
        let mut v = vec![0.0; n];
        for &(j, a) in &row.coefs {
            v[j] += a;
        }
        v
    };
    for row in lp.eq_rows.iter().chain(&lp.ub_rows) {
        planes.push((dense(row), row.rhs));
    }
    for (j, &(lo, hi)) in lp.var_bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lo));
        assert!(hi.is_finite(), "oracle needs bounded variables");
        planes.push((e, hi));
    }
    let feasible = |x: &[f64]| {
        lp.eq_rows.iter().all(|r| (r.dot(x) - r.rhs).abs() <= tol)
            && lp.ub_rows.iter().all(|r| r.dot(x) - r.rhs <= tol)
            && x.iter()
                .zip(&lp.var_bounds)
                .all(|(&v, &(lo, hi))| v >= lo - tol && v <= hi + tol)
    };
    let mut best: Option<f64> = None;
    for subset in combinations(planes.len(), n) {
        let a = DMatrix::from_fn(n, n, |i, j| planes[subset[i]].0[j]);
        let b = DVector::from_fn(n, |i, _| planes[subset[i]].1);
        let Some(x) = a.lu().solve(&b) else { continue };
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().any(|v| !v.is_finite()) || !feasible(&x) {
            continue;
        }
        let obj = lp.objective_value(&x);
        best = Some(best.map_or(obj, |b: f64| b.min(obj)));
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Small random LP with bounded variables: up to 4 columns and 4 rows.
/// Coefficients are drawn on a half-integer grid so ties and degenerate
/// vertices show up regularly.
pub fn random_bounded_lp(seed: u64) -> StandardLp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4);
    let rows = rng.random_range(0..=4);
    let mut lp = StandardLp::with_generic_vars(n);
    let half = |rng: &mut ChaCha8Rng, lo: i32, hi: i32| rng.random_range(lo..=hi) as f64 * 0.5;
    for j in 0..n {
        lp.objective[j] = half(&mut rng, -6, 6);
        let lo = half(&mut rng, -4, 2);
        let width = half(&mut rng, 0, 6);
        lp.var_bounds[j] = (lo, lo + width);
    }
    for _ in 0..rows {
        let mut coefs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.8) {
                coefs.push((j, half(&mut rng, -6, 6)));
            }
        }
        let rhs = half(&mut rng, -6, 6);
        if rng.random_bool(0.3) {
            lp.eq_rows.push(SparseRow::new(coefs, rhs));
        } else {
            lp.ub_rows.push(SparseRow::new(coefs, rhs));
        }
    }
    lp
}

/// Shapley values by averaging marginal contributions over all `m!` arrival
/// orders. `worth` takes a member bitmask; the empty mask must map to 0.
pub fn shapley_by_permutations(m: usize, worth: impl Fn(u32) -> f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..m).collect();
    let mut totals = vec![0.0; m];
    let mut count = 0usize;
    permute(&mut order, 0, &mut |perm| {
        let mut mask = 0u32;
        let mut prev = 0.0;
        for &p in perm {
            mask |= 1 << p;
            let v = worth(mask);
            totals[p] += v - prev;
            prev = v;
        }
        count += 1;
    });
    totals.iter().map(|t| t / count as f64).collect()
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

use smartgrid_coalition::data::{synth_scenario, RosterEntry, RosterSpec};
use smartgrid_coalition::model::{DispatchSolution, HouseholdKind, Scenario};

/// One synthetic day for the given household kinds, ids `h0`, `h1`, ...
pub fn synthetic_day(seed: u64, kinds: &[HouseholdKind]) -> Scenario {
    let roster = RosterSpec {
        days: 1,
        households: kinds
            .iter()
            .enumerate()
            .map(|(i, &kind)| RosterEntry {
                id: format!("h{i}"),
                kind,
                inhabitants: 2 + (i as u32 % 3),
            })
            .collect(),
        ..RosterSpec::default()
    };
    synth_scenario(seed, &roster).unwrap().scenario
}

/// Two prosumers, two storage owners and two consumers.
pub const FOUR_PLUS_TWO: [HouseholdKind; 6] = [
    HouseholdKind::Prosumer,
    HouseholdKind::Prosumer,
    HouseholdKind::StorageOwner,
    HouseholdKind::StorageOwner,
    HouseholdKind::Consumer,
    HouseholdKind::Consumer,
];

/// Largest violation of each constraint family, recomputed from decoded
/// schedules rather than from LP rows.
#[derive(Debug, Default, Clone, Copy)]
pub struct Residuals {
    pub storage_recurrence: f64,
    pub bounds: f64,
    pub sign: f64,
    pub balance: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.storage_recurrence
            .max(self.bounds)
            .max(self.sign)
            .max(self.balance)
    }
}

pub fn residuals(s: &Scenario, sol: &DispatchSolution) -> Residuals {
    let mut r = Residuals::default();
    let slots = s.grid.slots;
    for h in &sol.households {
        let hh = &s.households[h.household];
        if hh.kind.is_member() {
            let st = hh.storage.unwrap();
            let keep = 1.0 - st.leakage;
            for t in 0..slots {
                let prev = if t == 0 {
                    st.initial_kwh
                } else {
                    h.state_of_charge[t - 1]
                };
                let rec = h.state_of_charge[t] - keep * prev - h.storage_charge[t];
                r.storage_recurrence = r.storage_recurrence.max(rec.abs());
                let soc = h.state_of_charge[t];
                r.bounds = r
                    .bounds
                    .max(-soc)
                    .max(soc - st.capacity_kwh)
                    .max(h.storage_charge[t].abs() - st.rate_kwh)
                    .max(-h.grid_purchase[t]);
                let surplus = h.grid_purchase[t] + hh.renewable_kwh[t]
                    - hh.demand_kwh[t]
                    - h.exchange[t]
                    - h.storage_charge[t];
                r.sign = r.sign.max(-surplus);
            }
        } else {
            for t in 0..slots {
                let a = h.exchange[t];
                let b = h.grid_purchase[t];
                r.sign = r.sign.max(a).max(-b);
                r.bounds = r.bounds.max(-a - hh.demand_kwh[t]);
                r.balance = r.balance.max((hh.demand_kwh[t] - b + a).abs());
            }
        }
    }
    for t in 0..slots {
        let net: f64 = sol.households.iter().map(|h| h.exchange[t]).sum();
        r.balance = r.balance.max(net.abs());
    }
    r
}

use proptest::prelude::*;
use smartgrid_coalition::model::{Household, PriceParams, StorageSpec, Tariff, TimeGrid};

/// Small random community: 1 to 3 members, up to 2 consumers, 2 to 6
/// hourly slots.
pub fn scenario_strategy() -> impl Strategy<Value = Scenario> {
    (2usize..=6, 1usize..=3, 0usize..=2).prop_flat_map(|(slots, members, consumers)| {
        let member = (
            any::<bool>(),
            prop::collection::vec(0.0f64..3.0, slots),
            prop::collection::vec(0.0f64..4.0, slots),
            0.0f64..6.0,
            0.0f64..2.5,
            0.0f64..0.01,
            0.0f64..1.0,
        );
        let consumer = prop::collection::vec(0.0f64..3.0, slots);
        (
            prop::collection::vec(member, members),
            prop::collection::vec(consumer, consumers),
            prop::collection::vec(0.01f64..0.1, slots),
            0.0f64..=1.0,
        )
            .prop_map(move |(ms, cs, price, alpha)| {
                let mut households = Vec::new();
                for (i, (prosumer, demand, wind, cap, rate, leak, init)) in
                    ms.into_iter().enumerate()
                {
                    let kind = if prosumer {
                        HouseholdKind::Prosumer
                    } else {
                        HouseholdKind::StorageOwner
                    };
                    let storage = StorageSpec {
                        initial_kwh: init * cap,
                        ..StorageSpec::new(cap, rate, leak)
                    };
                    households.push(Household {
                        id: format!("m{i}"),
                        kind,
                        demand_kwh: demand,
                        renewable_kwh: if prosumer { wind } else { vec![0.0; slots] },
                        storage: Some(storage),
                    });
                }
                for (i, demand) in cs.into_iter().enumerate() {
                    households.push(Household {
                        id: format!("p{i}"),
                        kind: HouseholdKind::Consumer,
                        demand_kwh: demand,
                        renewable_kwh: vec![0.0; slots],
                        storage: None,
                    });
                }
                Scenario {
                    grid: TimeGrid::hourly(slots),
                    households,
                    tariff: Tariff {
                        grid_price: price,
                        alpha,
                    },
                    prices: PriceParams {
                        storage_cycle_price: 1e-4,
                        waste_penalty_price: 1e-3,
                        transfer_price: 1e-4,
                        consumer_margin: 0.0,
                    },
                }
            })
    })
}
