//! Compiles the individual, coalitional and whole-community cost problems
//! into [`StandardLp`]s and decodes solver output into [`DispatchSolution`]s.
//!
//! Absolute values are linearized by splitting: `r = r⁺ − r⁻` and
//! `a = a⁺ − a⁻` for members. A consumer's exchange `a_p ≤ 0` stays a single
//! column, so `|a_p| = −a_p`.
//!
//! Every objective carries the waste penalty `σ·Σ(b + w − u − a − r)`; its
//! constant part `σ·Σ(w − u)` goes into the LP's objective offset so the
//! reported LP objective is the exact penalized cost.

use std::fmt;
use std::io::Write;

use crate::lp::{
    check_feasible, solve_lp, LpBuilder, LpError, LpSolution, LpStatus, Quantity, SolverOptions,
    StandardLp, VarKey,
};
use crate::model::{CostBreakdown, DispatchSolution, HouseholdDispatch, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum DispatchError {
    #[error("household {0} is not a storage-owning member")]
    NotAMember(String),
    #[error("household index {0} is out of range")]
    UnknownHousehold(usize),
    #[error("coalition must contain at least one member")]
    EmptyCoalition,
    #[error("scenario has no consumers; use the coalitional problem instead")]
    NoConsumers,
    #[error("{problem}: solver returned {status:?}")]
    NotOptimal { problem: String, status: LpStatus },
    #[error("{problem}: {source}")]
    Solver { problem: String, source: LpError },
    #[error("variable registry mismatch: {0}")]
    Registry(String),
    #[error("{problem}: decoded point fails the constraint audit ({detail})")]
    Audit { problem: String, detail: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Which of the three cost problems to build. Household indices refer to
/// `Scenario::households`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Individual(usize),
    CoalitionalResEss(Vec<usize>),
    /// Members of the coalition plus every consumer of the scenario.
    Community(Vec<usize>),
}

impl ProblemKind {
    pub fn members(&self) -> Vec<usize> {
        match self {
            ProblemKind::Individual(m) => vec![*m],
            ProblemKind::CoalitionalResEss(g) | ProblemKind::Community(g) => g.clone(),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemKind::Individual(m) => write!(f, "individual problem of household #{m}"),
            ProblemKind::CoalitionalResEss(g) => write!(f, "coalitional problem for {g:?}"),
            ProblemKind::Community(g) => write!(f, "community problem for {g:?}"),
        }
    }
}

fn check_members(s: &Scenario, g: &[usize]) -> Result<(), DispatchError> {
    if g.is_empty() {
        return Err(DispatchError::EmptyCoalition);
    }
    for &m in g {
        let h = s
            .households
            .get(m)
            .ok_or(DispatchError::UnknownHousehold(m))?;
        if !h.kind.is_member() || h.storage.is_none() {
            return Err(DispatchError::NotAMember(h.id.clone()));
        }
    }
    Ok(())
}

/// Sparse `(column, coefficient)` terms of one row.
type Terms = Vec<(usize, f64)>;
/// Row terms and right-hand side.
type Row = (Terms, f64);

/// Adds the storage, purchase and (optionally) exchange columns of member
/// `m` plus its energy-consumption and storage-recurrence rows. Returns the
/// exchange terms `(a⁺ column, a⁻ column)` per slot when `exchange` is set.
fn add_member(
    lp: &mut LpBuilder,
    s: &Scenario,
    m: usize,
    exchange: bool,
    demand_rows: &mut Vec<Row>,
    storage_rows: &mut Vec<Row>,
) -> Vec<(usize, usize)> {
    let h = &s.households[m];
    let st = h.storage_or_empty();
    let p = &s.prices;
    let (pi, sigma, tau) = (
        p.storage_cycle_price,
        p.waste_penalty_price,
        p.transfer_price,
    );
    let keep = 1.0 - st.leakage;
    let mut flows = Vec::new();
    let mut prev_soc: Option<usize> = None;
    for t in 0..s.grid.slots {
        let xi = s.tariff.grid_price[t];
        let (u, w) = (h.demand_kwh[t], h.renewable_kwh[t]);
        let b = lp.add_var(
            VarKey::new(m, Quantity::GridPurchase, t),
            0.0,
            f64::INFINITY,
            xi + sigma,
        );
        let rp = lp.add_var(
            VarKey::new(m, Quantity::ChargeUp, t),
            0.0,
            st.rate_kwh,
            pi - sigma,
        );
        let rm = lp.add_var(
            VarKey::new(m, Quantity::ChargeDown, t),
            0.0,
            st.rate_kwh,
            pi + sigma,
        );
        let soc = lp.add_var(
            VarKey::new(m, Quantity::StateOfCharge, t),
            0.0,
            st.capacity_kwh,
            0.0,
        );
        lp.add_offset(sigma * (w - u));

        // u − w − b + r (+ a) ≤ 0
        let mut demand = vec![(b, -1.0), (rp, 1.0), (rm, -1.0)];
        if exchange {
            let ap = lp.add_var(
                VarKey::new(m, Quantity::ExportUp, t),
                0.0,
                f64::INFINITY,
                tau - sigma,
            );
            let am = lp.add_var(
                VarKey::new(m, Quantity::ExportDown, t),
                0.0,
                f64::INFINITY,
                tau + sigma,
            );
            demand.push((ap, 1.0));
            demand.push((am, -1.0));
            flows.push((ap, am));
        }
        demand_rows.push((demand, w - u));

        // s(t) − (1−η)s(t−1) − r(t) = 0
        let mut rec = vec![(soc, 1.0), (rp, -1.0), (rm, 1.0)];
        let rhs = match prev_soc {
            Some(prev) => {
                rec.push((prev, -keep));
                0.0
            }
            None => keep * st.initial_kwh,
        };
        storage_rows.push((rec, rhs));
        prev_soc = Some(soc);
    }
    flows
}

fn push_rows(lp: &mut LpBuilder, demand: Vec<Row>, storage: Vec<Row>) {
    for (row, rhs) in demand {
        lp.add_le(row, rhs);
    }
    for (row, rhs) in storage {
        lp.add_eq(row, rhs);
    }
}

/// Individual problem of member `m`: 4T columns, T demand rows followed by
/// T storage rows.
pub fn build_individual(s: &Scenario, m: usize) -> Result<StandardLp, DispatchError> {
    check_members(s, &[m])?;
    let mut lp = LpBuilder::new();
    let (mut demand, mut storage) = (Vec::new(), Vec::new());
    add_member(&mut lp, s, m, false, &mut demand, &mut storage);
    push_rows(&mut lp, demand, storage);
    Ok(lp.build())
}

fn coalition_builder(s: &Scenario, g: &[usize]) -> Result<(LpBuilder, Vec<Terms>), DispatchError> {
    check_members(s, g)?;
    let mut lp = LpBuilder::new();
    let (mut demand, mut storage) = (Vec::new(), Vec::new());
    let mut balance: Vec<Terms> = vec![Vec::new(); s.grid.slots];
    for &m in g {
        let flows = add_member(&mut lp, s, m, true, &mut demand, &mut storage);
        for (t, (ap, am)) in flows.into_iter().enumerate() {
            balance[t].push((ap, 1.0));
            balance[t].push((am, -1.0));
        }
    }
    push_rows(&mut lp, demand, storage);
    Ok((lp, balance))
}

/// Coalitional problem over members `g`: 6T|g| columns, 2T|g| member rows
/// and T balance rows `Σ a = 0`.
pub fn build_coalitional(s: &Scenario, g: &[usize]) -> Result<StandardLp, DispatchError> {
    let (mut lp, balance) = coalition_builder(s, g)?;
    for row in balance {
        lp.add_eq(row, 0.0);
    }
    Ok(lp.build())
}

/// Whole-community problem: the coalition `g` plus every consumer, who may
/// buy at `λ = α·ξ` as long as its bill stays at most its utility-only bill
/// minus the margin δ.
pub fn build_community(s: &Scenario, g: &[usize]) -> Result<StandardLp, DispatchError> {
    let consumers = s.consumers();
    if consumers.is_empty() {
        return Err(DispatchError::NoConsumers);
    }
    let (mut lp, mut balance) = coalition_builder(s, g)?;
    let tau = s.prices.transfer_price;
    let mut margin_rows = Vec::new();
    for &p in &consumers {
        let h = &s.households[p];
        let mut bill = Vec::new();
        for t in 0..s.grid.slots {
            let xi = s.tariff.grid_price[t];
            let lambda = s.tariff.community_price(t);
            let u = h.demand_kwh[t];
            let b = lp.add_var(
                VarKey::new(p, Quantity::GridPurchase, t),
                0.0,
                f64::INFINITY,
                0.0,
            );
            // Lower bound −u is implied by u − b + a = 0 with b ≥ 0.
            let a = lp.add_var(VarKey::new(p, Quantity::Exchange, t), -u, 0.0, lambda);
            lp.add_eq(vec![(b, -1.0), (a, 1.0)], -u);
            balance[t].push((a, 1.0));
            bill.push((b, xi));
            bill.push((a, -(tau + lambda)));
        }
        let baseline = h.utility_only_cost(&s.tariff.grid_price);
        margin_rows.push((bill, baseline - s.prices.consumer_margin));
    }
    for row in balance {
        lp.add_eq(row, 0.0);
    }
    for (row, rhs) in margin_rows {
        lp.add_le(row, rhs);
    }
    Ok(lp.build())
}

pub fn build(s: &Scenario, kind: &ProblemKind) -> Result<StandardLp, DispatchError> {
    match kind {
        ProblemKind::Individual(m) => build_individual(s, *m),
        ProblemKind::CoalitionalResEss(g) => build_coalitional(s, g),
        ProblemKind::Community(g) => build_community(s, g),
    }
}

/// Builds, solves and decodes one problem.
pub fn solve_problem(
    s: &Scenario,
    kind: &ProblemKind,
    options: &SolverOptions,
) -> Result<DispatchSolution, DispatchError> {
    let lp = build(s, kind)?;
    let sol = solve_lp(&lp, options).map_err(|source| DispatchError::Solver {
        problem: kind.to_string(),
        source,
    })?;
    decode(s, kind, &lp, &sol, options.feas_tol)
}

fn lookup(lp: &StandardLp, x: &[f64], key: VarKey) -> Result<f64, DispatchError> {
    lp.var_names
        .column(&key)
        .map(|j| x[j])
        .ok_or_else(|| DispatchError::Registry(format!("missing column {key}")))
}

/// Reconstructs per-household schedules and itemized costs from an optimal
/// LP point. Costs are recomputed from the decoded vectors, never read off
/// the LP objective.
pub fn decode(
    s: &Scenario,
    kind: &ProblemKind,
    lp: &StandardLp,
    sol: &LpSolution,
    feas_tol: f64,
) -> Result<DispatchSolution, DispatchError> {
    let problem = kind.to_string();
    let (Some(x), Some(objective), LpStatus::Optimal) = (&sol.x, sol.objective_value, sol.status)
    else {
        return Err(DispatchError::NotOptimal {
            problem,
            status: sol.status,
        });
    };
    if x.len() != lp.num_vars {
        return Err(DispatchError::Registry(format!(
            "solution has {} values for {} columns",
            x.len(),
            lp.num_vars
        )));
    }
    let violations = check_feasible(lp, x, feas_tol).map_err(|source| DispatchError::Solver {
        problem: problem.clone(),
        source,
    })?;
    if let Some(v) = violations.first() {
        return Err(DispatchError::Audit {
            problem,
            detail: v.to_string(),
        });
    }

    let slots = s.grid.slots;
    let xi = &s.tariff.grid_price;
    let p = &s.prices;
    let exchange = !matches!(kind, ProblemKind::Individual(_));
    let consumers = match kind {
        ProblemKind::Community(_) => s.consumers(),
        _ => Vec::new(),
    };

    let mut households = Vec::new();
    for &m in &kind.members() {
        let h = &s.households[m];
        let mut d = HouseholdDispatch {
            household: m,
            id: h.id.clone(),
            kind: h.kind,
            grid_purchase: Vec::with_capacity(slots),
            storage_charge: Vec::with_capacity(slots),
            state_of_charge: Vec::with_capacity(slots),
            exchange: Vec::with_capacity(slots),
            cost: CostBreakdown::default(),
        };
        for t in 0..slots {
            d.grid_purchase
                .push(lookup(lp, x, VarKey::new(m, Quantity::GridPurchase, t))?);
            d.storage_charge.push(
                lookup(lp, x, VarKey::new(m, Quantity::ChargeUp, t))?
                    - lookup(lp, x, VarKey::new(m, Quantity::ChargeDown, t))?,
            );
            d.state_of_charge
                .push(lookup(lp, x, VarKey::new(m, Quantity::StateOfCharge, t))?);
            d.exchange.push(if exchange {
                lookup(lp, x, VarKey::new(m, Quantity::ExportUp, t))?
                    - lookup(lp, x, VarKey::new(m, Quantity::ExportDown, t))?
            } else {
                0.0
            });
        }
        households.push(d);
    }
    for &c in &consumers {
        let h = &s.households[c];
        let mut b = Vec::with_capacity(slots);
        let mut a = Vec::with_capacity(slots);
        for t in 0..slots {
            b.push(lookup(lp, x, VarKey::new(c, Quantity::GridPurchase, t))?);
            a.push(lookup(lp, x, VarKey::new(c, Quantity::Exchange, t))?);
        }
        households.push(HouseholdDispatch {
            household: c,
            id: h.id.clone(),
            kind: h.kind,
            grid_purchase: b,
            storage_charge: vec![0.0; slots],
            state_of_charge: vec![0.0; slots],
            exchange: a,
            cost: CostBreakdown::default(),
        });
    }

    let n_members = households.len() - consumers.len();
    let revenue = attribute_sales(s, &households[..n_members], &households[n_members..]);
    for (i, d) in households.iter_mut().enumerate() {
        let h = &s.households[d.household];
        let grid: f64 = (0..slots).map(|t| xi[t] * d.grid_purchase[t]).sum();
        d.cost = if i < n_members {
            let storage =
                p.storage_cycle_price * d.storage_charge.iter().map(|r| r.abs()).sum::<f64>();
            let operation = p.transfer_price * d.exchange.iter().map(|a| a.abs()).sum::<f64>();
            let surplus: f64 = (0..slots)
                .map(|t| {
                    d.grid_purchase[t] + h.renewable_kwh[t]
                        - h.demand_kwh[t]
                        - d.exchange[t]
                        - d.storage_charge[t]
                })
                .sum();
            CostBreakdown::new(
                grid,
                storage,
                operation,
                revenue[i],
                0.0,
                p.waste_penalty_price * surplus,
            )
        } else {
            let bought: f64 = d.exchange.iter().map(|a| -a).sum();
            let purchase: f64 = (0..slots)
                .map(|t| s.tariff.community_price(t) * -d.exchange[t])
                .sum();
            CostBreakdown::new(grid, 0.0, p.transfer_price * bought, 0.0, purchase, 0.0)
        };
    }

    let aggregate = households[..n_members].iter().map(|d| d.cost).sum();
    let consumer_aggregate = households[n_members..].iter().map(|d| d.cost).sum();
    Ok(DispatchSolution {
        households,
        aggregate,
        consumer_aggregate,
        lp_objective: objective,
        iterations: sol.iterations,
    })
}

/// Splits each slot's consumer payments `λ·Σ(−a_p)` across members in
/// proportion to their positive net exports in that slot.
fn attribute_sales(
    s: &Scenario,
    members: &[HouseholdDispatch],
    consumers: &[HouseholdDispatch],
) -> Vec<f64> {
    let mut revenue = vec![0.0; members.len()];
    if consumers.is_empty() || members.is_empty() {
        return revenue;
    }
    for t in 0..s.grid.slots {
        let paid: f64 = consumers
            .iter()
            .map(|c| s.tariff.community_price(t) * -c.exchange[t])
            .sum();
        if paid == 0.0 {
            continue;
        }
        let exports: Vec<f64> = members.iter().map(|m| m.exchange[t].max(0.0)).collect();
        let total: f64 = exports.iter().sum();
        for (r, e) in revenue.iter_mut().zip(&exports) {
            *r += if total > 0.0 {
                paid * e / total
            } else {
                paid / members.len() as f64
            };
        }
    }
    revenue
}

/// Schedule of a consumer that buys all of its demand from the utility.
pub fn utility_only_dispatch(s: &Scenario, p: usize) -> HouseholdDispatch {
    let h = &s.households[p];
    let slots = s.grid.slots;
    let grid = h.utility_only_cost(&s.tariff.grid_price);
    HouseholdDispatch {
        household: p,
        id: h.id.clone(),
        kind: h.kind,
        grid_purchase: h.demand_kwh.clone(),
        storage_charge: vec![0.0; slots],
        state_of_charge: vec![0.0; slots],
        exchange: vec![0.0; slots],
        cost: CostBreakdown::new(grid, 0.0, 0.0, 0.0, 0.0, 0.0),
    }
}

/// One row per (household, slot) with purchase `b`, net charge `r`, state
/// of charge `s` and exchange `a`.
pub fn write_schedule_csv<W: Write>(sol: &DispatchSolution, out: W) -> Result<(), DispatchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["household", "slot", "b", "r", "s", "a"])?;
    for h in &sol.households {
        for t in 0..h.grid_purchase.len() {
            w.write_record([
                h.id.clone(),
                t.to_string(),
                h.grid_purchase[t].to_string(),
                h.storage_charge[t].to_string(),
                h.state_of_charge[t].to_string(),
                h.exchange[t].to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row per household with its itemized costs.
pub fn write_costs_csv<W: Write>(sol: &DispatchSolution, out: W) -> Result<(), DispatchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "household",
        "kind",
        "grid_cost",
        "storage_cost",
        "operation_cost",
        "purchase_revenue",
        "purchase_cost",
        "penalty_charge",
        "total",
    ])?;
    for h in &sol.households {
        let c = &h.cost;
        let mut row = vec![h.id.clone(), format!("{:?}", h.kind)];
        row.extend(
            [
                c.grid_cost,
                c.storage_cost,
                c.operation_cost,
                c.purchase_revenue,
                c.purchase_cost,
                c.penalty_charge,
                c.total,
            ]
            .iter()
            .map(f64::to_string),
        );
        w.write_record(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
