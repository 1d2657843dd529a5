//! Rolling multi-day simulation. Each method threads its own storage levels
//! from one day to the next, accumulates daily costs and, optionally,
//! computes daily Shapley payoffs for the coalitional methods.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::{solve_problem, utility_only_dispatch, DispatchError, ProblemKind};
use crate::game::{
    build_coalition_table, shapley, CoalitionTable, GameError, IndividualCost, ShapleyAllocation,
    Variant,
};
use crate::lp::SolverOptions;
use crate::model::{CostBreakdown, DispatchSolution, HouseholdKind, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum HorizonError {
    #[error("no days to simulate")]
    NoDays,
    #[error("no methods selected")]
    NoMethods,
    #[error("day {day}: {message}")]
    Roster { day: usize, message: String },
    #[error("day {day}, {method}: {source}")]
    Dispatch {
        day: usize,
        method: Method,
        source: DispatchError,
    },
    #[error("day {day}, {method}: {source}")]
    Game {
        day: usize,
        method: Method,
        source: GameError,
    },
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Individual,
    CoalitionalResEss,
    Community,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::Individual,
        Method::CoalitionalResEss,
        Method::Community,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Individual => "individual",
            Method::CoalitionalResEss => "coalitional",
            Method::Community => "community",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::Individual => None,
            Method::CoalitionalResEss => Some(Variant::ResEss),
            Method::Community => Some(Variant::Community),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "individual" => Ok(Method::Individual),
            "coalitional" | "resess" => Ok(Method::CoalitionalResEss),
            "community" => Ok(Method::Community),
            other => Err(format!(
                "unknown method {other:?} (expected individual, coalitional or community)"
            )),
        }
    }
}

/// How each day's initial storage is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageMode {
    /// Every method starts each day from its own previous terminal levels.
    #[default]
    Independent,
    /// Every method starts each day from the reference trajectory: the
    /// individual method's if it runs, otherwise the first method's.
    SharedInit,
}

impl FromStr for StorageMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(StorageMode::Independent),
            "shared-init" => Ok(StorageMode::SharedInit),
            other => Err(format!(
                "unknown storage mode {other:?} (expected independent or shared-init)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonOptions {
    pub methods: Vec<Method>,
    pub shapley: bool,
    pub storage_mode: StorageMode,
    pub solver: SolverOptions,
}

impl Default for HorizonOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            shapley: false,
            storage_mode: StorageMode::Independent,
            solver: SolverOptions::default(),
        }
    }
}

/// One method's result for one day. `dispatch` lists every household:
/// members first, then consumers (who pay the utility-only bill under the
/// methods that exclude them).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayMethodResult {
    pub method: Method,
    pub dispatch: DispatchSolution,
    /// Per member, in [`Scenario::members`] order.
    pub initial_storage: Vec<f64>,
    pub terminal_storage: Vec<f64>,
    pub table: Option<CoalitionTable>,
    pub shapley: Option<ShapleyAllocation>,
}

impl DayMethodResult {
    pub fn member_cost(&self) -> f64 {
        self.dispatch.aggregate.total
    }

    pub fn consumer_cost(&self) -> f64 {
        self.dispatch.consumer_aggregate.total
    }

    /// Per-member monetary cost and objective contribution, in member order.
    pub fn individual_costs(&self) -> Vec<IndividualCost> {
        individual_costs_of(&self.dispatch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayResult {
    pub day: usize,
    pub methods: Vec<DayMethodResult>,
}

impl DayResult {
    pub fn method(&self, method: Method) -> Option<&DayMethodResult> {
        self.methods.iter().find(|r| r.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonRun {
    pub methods: Vec<Method>,
    pub storage_mode: StorageMode,
    pub household_ids: Vec<String>,
    pub household_kinds: Vec<HouseholdKind>,
    /// Bill of each household if it bought all demand from the utility,
    /// `[day][household]`.
    pub utility_only_bill: Vec<Vec<f64>>,
    pub days: Vec<DayResult>,
}

impl HorizonRun {
    fn day_costs(&self, method: Method) -> impl Iterator<Item = &DayMethodResult> {
        self.days.iter().filter_map(move |d| d.method(method))
    }

    /// Daily total per household, `[day][household]`.
    pub fn daily_costs(&self, method: Method) -> Vec<Vec<f64>> {
        self.day_costs(method)
            .map(|r| {
                let mut row = vec![0.0; self.household_ids.len()];
                for h in &r.dispatch.households {
                    row[h.household] = h.cost.total;
                }
                row
            })
            .collect()
    }

    /// Running sums of [`HorizonRun::daily_costs`].
    pub fn cumulative_costs(&self, method: Method) -> Vec<Vec<f64>> {
        let mut acc = vec![0.0; self.household_ids.len()];
        self.daily_costs(method)
            .into_iter()
            .map(|row| {
                for (a, c) in acc.iter_mut().zip(row) {
                    *a += c;
                }
                acc.clone()
            })
            .collect()
    }

    pub fn total_member_cost(&self, method: Method) -> f64 {
        self.day_costs(method)
            .map(DayMethodResult::member_cost)
            .sum()
    }

    pub fn total_consumer_cost(&self, method: Method) -> f64 {
        self.day_costs(method)
            .map(DayMethodResult::consumer_cost)
            .sum()
    }

    /// Total utility-only bill of the consumers over all days.
    pub fn total_consumer_baseline(&self) -> f64 {
        self.utility_only_bill
            .iter()
            .flat_map(|day| day.iter().zip(&self.household_kinds))
            .filter(|(_, k)| !k.is_member())
            .map(|(b, _)| b)
            .sum()
    }

    /// Member savings of `method` against the individual method, percent.
    pub fn member_savings_pct(&self, method: Method) -> Option<f64> {
        if !self.methods.contains(&Method::Individual) || !self.methods.contains(&method) {
            return None;
        }
        let base = self.total_member_cost(Method::Individual);
        Some(100.0 * (base - self.total_member_cost(method)) / base)
    }

    /// Consumer savings under the community method against buying
    /// everything from the utility, percent.
    pub fn consumer_savings_pct(&self) -> Option<f64> {
        if !self.methods.contains(&Method::Community) {
            return None;
        }
        let base = self.total_consumer_baseline();
        Some(100.0 * (base - self.total_consumer_cost(Method::Community)) / base)
    }

    /// Days on which `method` cost the members more than the individual
    /// method did (1-based).
    pub fn days_worse_than_individual(&self, method: Method, tol: f64) -> Vec<usize> {
        self.days
            .iter()
            .filter_map(|d| {
                let ind = d.method(Method::Individual)?.member_cost();
                let m = d.method(method)?.member_cost();
                (m > ind + tol).then_some(d.day + 1)
            })
            .collect()
    }

    /// One row per (day, method, household) with daily and cumulative cost
    /// and the Shapley payoff where computed.
    pub fn write_run_log<W: Write>(&self, out: W) -> Result<(), HorizonError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "day",
            "method",
            "household",
            "kind",
            "daily_cost",
            "cumulative_cost",
            "shapley_payoff",
            "initial_storage",
            "terminal_storage",
        ])?;
        for &method in &self.methods {
            let mut cumulative = vec![0.0; self.household_ids.len()];
            for d in &self.days {
                let Some(r) = d.method(method) else { continue };
                let members: Vec<usize> = r
                    .dispatch
                    .households
                    .iter()
                    .filter(|h| h.kind.is_member())
                    .map(|h| h.household)
                    .collect();
                for h in &r.dispatch.households {
                    cumulative[h.household] += h.cost.total;
                    let payoff = r.shapley.as_ref().and_then(|s| {
                        s.members
                            .iter()
                            .position(|&m| m == h.household)
                            .map(|i| s.payoffs[i].to_string())
                    });
                    let slot = members.iter().position(|&m| m == h.household);
                    let storage = |v: &[f64]| slot.map(|i| v[i].to_string()).unwrap_or_default();
                    w.write_record([
                        (d.day + 1).to_string(),
                        method.name().to_string(),
                        h.id.clone(),
                        format!("{:?}", h.kind),
                        h.cost.total.to_string(),
                        cumulative[h.household].to_string(),
                        payoff.unwrap_or_default(),
                        storage(&r.initial_storage),
                        storage(&r.terminal_storage),
                    ])?;
                }
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Cumulative cost per household for `method`, one row per day, plus
    /// member and consumer totals.
    pub fn write_cumulative_csv<W: Write>(
        &self,
        method: Method,
        out: W,
    ) -> Result<(), HorizonError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["day".to_string()];
        header.extend(self.household_ids.iter().cloned());
        header.push("members_total".into());
        header.push("consumers_total".into());
        w.write_record(&header)?;
        for (d, row) in self.cumulative_costs(method).into_iter().enumerate() {
            let (mut members, mut consumers) = (0.0, 0.0);
            for (c, kind) in row.iter().zip(&self.household_kinds) {
                if kind.is_member() {
                    members += c;
                } else {
                    consumers += c;
                }
            }
            let mut rec = vec![(d + 1).to_string()];
            rec.extend(row.iter().map(f64::to_string));
            rec.push(members.to_string());
            rec.push(consumers.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_roster(days: &[Scenario]) -> Result<(), HorizonError> {
    let first = days.first().ok_or(HorizonError::NoDays)?;
    for (d, s) in days.iter().enumerate() {
        let err = |message: String| HorizonError::Roster {
            day: d + 1,
            message,
        };
        if s.grid != first.grid {
            return Err(err(format!(
                "{} slots of {} h differ from day 1",
                s.grid.slots, s.grid.slot_hours
            )));
        }
        if s.households.len() != first.households.len() {
            return Err(err("household count differs from day 1".into()));
        }
        for (a, b) in s.households.iter().zip(&first.households) {
            let same_storage = match (a.storage, b.storage) {
                (Some(x), Some(y)) => {
                    x.capacity_kwh == y.capacity_kwh
                        && x.rate_kwh == y.rate_kwh
                        && x.leakage == y.leakage
                }
                (None, None) => true,
                _ => false,
            };
            if a.id != b.id || a.kind != b.kind || !same_storage {
                return Err(err(format!("household {} differs from day 1", a.id)));
            }
        }
    }
    Ok(())
}

/// Solves one method on one day, with consumers appended at their
/// utility-only bill when the method excludes them.
fn solve_method(
    s: &Scenario,
    method: Method,
    options: &SolverOptions,
) -> Result<DispatchSolution, DispatchError> {
    let members = s.members();
    let mut sol = match method {
        Method::Individual => {
            let parts = members
                .par_iter()
                .map(|&m| solve_problem(s, &ProblemKind::Individual(m), options))
                .collect::<Result<Vec<_>, _>>()?;
            DispatchSolution {
                aggregate: parts.iter().map(|p| p.aggregate).sum(),
                consumer_aggregate: CostBreakdown::default(),
                lp_objective: parts.iter().map(|p| p.lp_objective).sum(),
                iterations: parts.iter().map(|p| p.iterations).sum(),
                households: parts.into_iter().flat_map(|p| p.households).collect(),
            }
        }
        Method::CoalitionalResEss => {
            solve_problem(s, &ProblemKind::CoalitionalResEss(members), options)?
        }
        Method::Community => return solve_problem(s, &ProblemKind::Community(members), options),
    };
    let consumers: Vec<_> = s
        .consumers()
        .into_iter()
        .map(|p| utility_only_dispatch(s, p))
        .collect();
    sol.consumer_aggregate = consumers.iter().map(|h| h.cost).sum();
    sol.households.extend(consumers);
    Ok(sol)
}

fn individual_costs_of(sol: &DispatchSolution) -> Vec<IndividualCost> {
    sol.households
        .iter()
        .filter(|h| h.kind.is_member())
        .map(|h| IndividualCost {
            total: h.cost.total,
            objective: h.cost.objective_equivalent(),
        })
        .collect()
}

fn terminal_storage(s: &Scenario, sol: &DispatchSolution) -> Vec<f64> {
    s.members()
        .iter()
        .map(|&m| sol.household(m).map_or(0.0, |h| h.terminal_storage()))
        .collect()
}

/// Runs `options.methods` over consecutive days. Day 1 starts from the
/// storage levels in `days[0]`; later days start from the terminal levels
/// chosen by `options.storage_mode`.
pub fn run_horizon(
    days: &[Scenario],
    options: &HorizonOptions,
) -> Result<HorizonRun, HorizonError> {
    check_roster(days)?;
    if options.methods.is_empty() {
        return Err(HorizonError::NoMethods);
    }
    let mut methods = options.methods.clone();
    methods.sort();
    methods.dedup();
    let reference = if methods.contains(&Method::Individual) {
        Method::Individual
    } else {
        methods[0]
    };
    let first = &days[0];
    let mut carry: Vec<Vec<f64>> = vec![first.initial_storage(); methods.len()];
    let mut results = Vec::with_capacity(days.len());

    for (d, day) in days.iter().enumerate() {
        let inits: Vec<Vec<f64>> = match options.storage_mode {
            StorageMode::Independent => carry.clone(),
            StorageMode::SharedInit => {
                let i = methods.iter().position(|&m| m == reference).unwrap_or(0);
                vec![carry[i].clone(); methods.len()]
            }
        };
        let solved = methods
            .par_iter()
            .zip(inits.par_iter())
            .map(|(&method, init)| {
                let s = day.with_initial_storage(init);
                let dispatch = solve_method(&s, method, &options.solver).map_err(|source| {
                    HorizonError::Dispatch {
                        day: d + 1,
                        method,
                        source,
                    }
                })?;
                Ok((s, dispatch))
            })
            .collect::<Result<Vec<_>, HorizonError>>()?;

        // Individual costs of the reference run are the baseline of every
        // coalition table that day.
        let baseline: Option<Vec<IndividualCost>> = methods
            .iter()
            .position(|&m| m == Method::Individual)
            .map(|i| individual_costs_of(&solved[i].1));

        let mut day_results = Vec::with_capacity(methods.len());
        for ((&method, init), (s, dispatch)) in methods.iter().zip(&inits).zip(solved) {
            let (table, allocation) = match method.variant() {
                Some(variant) if options.shapley => {
                    let game_err = |source| HorizonError::Game {
                        day: d + 1,
                        method,
                        source,
                    };
                    let table =
                        build_coalition_table(&s, variant, &options.solver, baseline.as_deref())
                            .map_err(game_err)?;
                    let alloc = shapley(&table).map_err(game_err)?;
                    (Some(table), Some(alloc))
                }
                _ => (None, None),
            };
            let terminal = terminal_storage(&s, &dispatch);
            debug!(
                "day {} {}: members {:.6} consumers {:.6}",
                d + 1,
                method,
                dispatch.aggregate.total,
                dispatch.consumer_aggregate.total
            );
            day_results.push(DayMethodResult {
                method,
                dispatch,
                initial_storage: init.clone(),
                terminal_storage: terminal,
                table,
                shapley: allocation,
            });
        }
        for (c, r) in carry.iter_mut().zip(&day_results) {
            c.clone_from(&r.terminal_storage);
        }
        results.push(DayResult {
            day: d,
            methods: day_results,
        });
    }
    info!("simulated {} days with {:?}", days.len(), methods);

    Ok(HorizonRun {
        methods,
        storage_mode: options.storage_mode,
        household_ids: first.households.iter().map(|h| h.id.clone()).collect(),
        household_kinds: first.households.iter().map(|h| h.kind).collect(),
        utility_only_bill: days
            .iter()
            .map(|s| {
                s.households
                    .iter()
                    .map(|h| h.utility_only_cost(&s.tariff.grid_price))
                    .collect()
            })
            .collect(),
        days: results,
    })
}

/// Horizon totals at one value of α.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    /// Members' individual cost minus their community cost.
    pub member_worth: f64,
    /// Consumers' utility-only bill minus their community cost.
    pub consumer_savings: f64,
    /// Sale revenue credited to members.
    pub member_sales_revenue: f64,
    /// What consumers paid members for energy.
    pub consumer_purchase_cost: f64,
    pub consumer_purchase_kwh: f64,
}

/// Horizon totals at one per-member storage capacity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityPoint {
    pub capacity_kwh: f64,
    pub individual_cost: f64,
    pub coalitional_cost: f64,
    pub community_cost: f64,
    pub coalitional_worth: f64,
    pub community_worth: f64,
    pub consumer_savings: f64,
}

fn check_grid(values: &[f64], name: &str, valid: impl Fn(f64) -> bool) -> Result<(), HorizonError> {
    if values.is_empty() {
        return Err(HorizonError::Sweep(format!("empty {name} grid")));
    }
    if let Some(v) = values.iter().find(|&&v| !valid(v)) {
        return Err(HorizonError::Sweep(format!("{name} {v} out of range")));
    }
    Ok(())
}

/// Re-runs the community method at each α against the individual method.
pub fn sweep_alpha(
    days: &[Scenario],
    alphas: &[f64],
    options: &HorizonOptions,
) -> Result<Vec<AlphaPoint>, HorizonError> {
    check_grid(alphas, "alpha", |a| (0.0..=1.0).contains(&a))?;
    let opts = HorizonOptions {
        methods: vec![Method::Individual, Method::Community],
        shapley: false,
        ..options.clone()
    };
    alphas
        .iter()
        .map(|&alpha| {
            let shifted: Vec<Scenario> = days.iter().map(|s| s.with_alpha(alpha)).collect();
            let run = run_horizon(&shifted, &opts)?;
            let comm = run.day_costs(Method::Community);
            let (mut revenue, mut purchase, mut kwh) = (0.0, 0.0, 0.0);
            for r in comm {
                revenue += r.dispatch.aggregate.purchase_revenue;
                purchase += r.dispatch.consumer_aggregate.purchase_cost;
                kwh += r
                    .dispatch
                    .households
                    .iter()
                    .filter(|h| !h.kind.is_member())
                    .flat_map(|h| h.exchange.iter())
                    .map(|a| -a)
                    .sum::<f64>();
            }
            info!("alpha {alpha}: done");
            Ok(AlphaPoint {
                alpha,
                member_worth: run.total_member_cost(Method::Individual)
                    - run.total_member_cost(Method::Community),
                consumer_savings: run.total_consumer_baseline()
                    - run.total_consumer_cost(Method::Community),
                member_sales_revenue: revenue,
                consumer_purchase_cost: purchase,
                consumer_purchase_kwh: kwh,
            })
        })
        .collect()
}

/// Re-runs all three methods with every member's capacity set to each
/// value in turn.
pub fn sweep_capacity(
    days: &[Scenario],
    capacities: &[f64],
    options: &HorizonOptions,
) -> Result<Vec<CapacityPoint>, HorizonError> {
    check_grid(capacities, "capacity", |c| c >= 0.0 && c.is_finite())?;
    let opts = HorizonOptions {
        methods: Method::ALL.to_vec(),
        shapley: false,
        ..options.clone()
    };
    capacities
        .iter()
        .map(|&c| {
            let resized: Vec<Scenario> = days.iter().map(|s| s.with_member_capacity(c)).collect();
            let run = run_horizon(&resized, &opts)?;
            let ind = run.total_member_cost(Method::Individual);
            let coal = run.total_member_cost(Method::CoalitionalResEss);
            let comm = run.total_member_cost(Method::Community);
            info!("capacity {c} kWh: done");
            Ok(CapacityPoint {
                capacity_kwh: c,
                individual_cost: ind,
                coalitional_cost: coal,
                community_cost: comm,
                coalitional_worth: ind - coal,
                community_worth: ind - comm,
                consumer_savings: run.total_consumer_baseline()
                    - run.total_consumer_cost(Method::Community),
            })
        })
        .collect()
}

pub fn write_alpha_csv<W: Write>(points: &[AlphaPoint], out: W) -> Result<(), HorizonError> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_capacity_csv<W: Write>(points: &[CapacityPoint], out: W) -> Result<(), HorizonError> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Household, PriceParams, StorageSpec, Tariff, TimeGrid};

    fn day(u: Vec<f64>, w: Vec<f64>, xi: Vec<f64>) -> Scenario {
        let t = u.len();
        Scenario {
            grid: TimeGrid::hourly(t),
            households: vec![
                Household {
                    id: "m1".into(),
                    kind: HouseholdKind::Prosumer,
                    demand_kwh: u,
                    renewable_kwh: w,
                    storage: Some(StorageSpec::new(5.0, 5.0, 0.0)),
                },
                Household {
                    id: "p1".into(),
                    kind: HouseholdKind::Consumer,
                    demand_kwh: vec![0.5; t],
                    renewable_kwh: vec![0.0; t],
                    storage: None,
                },
            ],
            tariff: Tariff {
                grid_price: xi,
                alpha: 0.9,
            },
            prices: PriceParams::default(),
        }
    }

    #[test]
    fn parses_names() {
        assert_eq!(
            "coalitional".parse::<Method>().unwrap(),
            Method::CoalitionalResEss
        );
        assert!("both".parse::<Method>().is_err());
        assert_eq!(
            "shared-init".parse::<StorageMode>().unwrap(),
            StorageMode::SharedInit
        );
        assert!("shared".parse::<StorageMode>().is_err());
    }

    #[test]
    fn carries_terminal_storage_into_next_day() {
        // Surplus in the last slot is stored rather than wasted.
        let d = day(vec![0.0, 0.0], vec![0.0, 3.0], vec![0.1, 0.1]);
        let options = HorizonOptions {
            methods: vec![Method::Individual],
            ..HorizonOptions::default()
        };
        let run = run_horizon(&[d.clone(), d], &options).unwrap();
        let d1 = run.days[0].method(Method::Individual).unwrap();
        let d2 = run.days[1].method(Method::Individual).unwrap();
        assert!((d1.terminal_storage[0] - 3.0).abs() < 1e-9);
        assert_eq!(d2.initial_storage[0], d1.terminal_storage[0]);
        assert_eq!(d1.initial_storage[0], 0.0);
    }

    #[test]
    fn one_day_individual_equals_direct_solve() {
        let d = day(vec![1.0, 2.0], vec![0.5, 0.0], vec![0.05, 0.08]);
        let options = HorizonOptions {
            methods: vec![Method::Individual],
            ..HorizonOptions::default()
        };
        let run = run_horizon(std::slice::from_ref(&d), &options).unwrap();
        let direct =
            solve_problem(&d, &ProblemKind::Individual(0), &SolverOptions::default()).unwrap();
        let r = run.days[0].method(Method::Individual).unwrap();
        assert_eq!(r.dispatch.aggregate, direct.aggregate);
        assert_eq!(r.dispatch.households[0], direct.households[0]);
        // The consumer pays its utility-only bill.
        assert_eq!(r.consumer_cost(), 0.5 * 0.05 + 0.5 * 0.08);
    }

    #[test]
    fn roster_mismatch_is_rejected() {
        let a = day(vec![1.0], vec![0.0], vec![0.1]);
        let mut b = a.clone();
        b.households[0].id = "other".into();
        let err = run_horizon(&[a.clone(), b], &HorizonOptions::default()).unwrap_err();
        assert!(matches!(err, HorizonError::Roster { day: 2, .. }));
        let c = day(vec![1.0, 1.0], vec![0.0, 0.0], vec![0.1, 0.1]);
        assert!(run_horizon(&[a, c], &HorizonOptions::default()).is_err());
        assert!(matches!(
            run_horizon(&[], &HorizonOptions::default()),
            Err(HorizonError::NoDays)
        ));
    }

    #[test]
    fn empty_sweep_grid_is_rejected() {
        let d = day(vec![1.0], vec![0.0], vec![0.1]);
        assert!(matches!(
            sweep_alpha(std::slice::from_ref(&d), &[], &HorizonOptions::default()),
            Err(HorizonError::Sweep(_))
        ));
        assert!(sweep_alpha(std::slice::from_ref(&d), &[1.5], &HorizonOptions::default()).is_err());
        assert!(sweep_capacity(&[d], &[-1.0], &HorizonOptions::default()).is_err());
    }
}
