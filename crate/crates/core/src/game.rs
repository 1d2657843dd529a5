//! Coalition worths over every subset of members and exact Shapley payoffs.
//!
//! The worth of coalition `G` is the monetary saving
//! `v(G) = Σ_{m∈G} c_m^indiv − c_G` (penalty excluded), with `v(∅) = 0`.
//! Subsets are bitmasks over the scenario's members in index order.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::{solve_problem, DispatchError, ProblemKind};
use crate::lp::SolverOptions;
use crate::model::Scenario;

/// Largest member count for exact enumeration.
pub const MAX_MEMBERS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum GameError {
    #[error("{members} members exceed the exact-enumeration cap of {MAX_MEMBERS}; a sampling estimator would be needed")]
    TooManyMembers { members: usize },
    #[error("scenario has no members")]
    NoMembers,
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error("incomplete coalition table: {0}")]
    Incomplete(String),
    #[error("baseline has {found} costs for {expected} members")]
    Baseline { expected: usize, found: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Members share renewables and storage among themselves only.
    ResEss,
    /// Members additionally sell to every consumer of the scenario.
    Community,
}

impl Variant {
    fn problem(self, g: Vec<usize>) -> ProblemKind {
        match self {
            Variant::ResEss => ProblemKind::CoalitionalResEss(g),
            Variant::Community => ProblemKind::Community(g),
        }
    }
}

/// Stand-alone cost of one member: monetary total and LP objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndividualCost {
    pub total: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionEntry {
    pub mask: u32,
    pub individual_sum: f64,
    pub coalition_cost: f64,
    pub worth: f64,
    /// Same saving measured on LP objectives (penalty included).
    pub objective_worth: f64,
}

/// Every nonempty coalition of the members; `entries[mask − 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionTable {
    pub variant: Variant,
    /// Household indices of the members; bit `i` of a mask is `members[i]`.
    pub members: Vec<usize>,
    pub ids: Vec<String>,
    pub individual: Vec<IndividualCost>,
    pub entries: Vec<CoalitionEntry>,
}

impl CoalitionTable {
    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    pub fn entry(&self, mask: u32) -> Option<&CoalitionEntry> {
        (mask as usize)
            .checked_sub(1)
            .and_then(|i| self.entries.get(i))
    }

    /// Worth of `mask`, zero for the empty coalition.
    pub fn worth(&self, mask: u32) -> Option<f64> {
        if mask == 0 {
            Some(0.0)
        } else {
            self.entry(mask).map(|e| e.worth)
        }
    }

    pub fn grand_mask(&self) -> u32 {
        ((1u64 << self.members.len()) - 1) as u32
    }

    pub fn grand_worth(&self) -> f64 {
        self.worth(self.grand_mask()).unwrap_or(0.0)
    }

    pub fn mask_members(&self, mask: u32) -> Vec<usize> {
        (0..self.members.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.members[i])
            .collect()
    }

    fn mask_label(&self, mask: u32) -> String {
        (0..self.members.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.ids[i].as_str())
            .collect::<Vec<_>>()
            .join("+")
    }

    /// CSV with one row per coalition.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GameError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "mask",
            "members",
            "individual_sum",
            "coalition_cost",
            "worth",
            "objective_worth",
        ])?;
        for e in &self.entries {
            w.write_record([
                e.mask.to_string(),
                self.mask_label(e.mask),
                e.individual_sum.to_string(),
                e.coalition_cost.to_string(),
                e.worth.to_string(),
                e.objective_worth.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyAllocation {
    pub members: Vec<usize>,
    pub ids: Vec<String>,
    pub payoffs: Vec<f64>,
    pub grand_worth: f64,
}

impl ShapleyAllocation {
    /// `Σ Φ − v(𝓜)`.
    pub fn efficiency_gap(&self) -> f64 {
        self.payoffs.iter().sum::<f64>() - self.grand_worth
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GameError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["member", "payoff"])?;
        for (id, p) in self.ids.iter().zip(&self.payoffs) {
            w.write_record([id.clone(), p.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_size(m: usize) -> Result<(), GameError> {
    match m {
        0 => Err(GameError::NoMembers),
        m if m > MAX_MEMBERS => Err(GameError::TooManyMembers { members: m }),
        _ => Ok(()),
    }
}

/// Stand-alone costs of every member, solved in parallel.
pub fn individual_costs(
    s: &Scenario,
    options: &SolverOptions,
) -> Result<Vec<IndividualCost>, GameError> {
    s.members()
        .into_par_iter()
        .map(|m| {
            let sol = solve_problem(s, &ProblemKind::Individual(m), options)?;
            Ok(IndividualCost {
                total: sol.aggregate.total,
                objective: sol.lp_objective,
            })
        })
        .collect()
}

/// Monetary saving of coalition `g` (household indices) over its members
/// acting alone.
pub fn coalition_worth(
    s: &Scenario,
    g: &[usize],
    variant: Variant,
    options: &SolverOptions,
) -> Result<f64, GameError> {
    let alone: f64 = g
        .iter()
        .map(|&m| solve_problem(s, &ProblemKind::Individual(m), options).map(|d| d.aggregate.total))
        .sum::<Result<f64, _>>()?;
    let together = solve_problem(s, &variant.problem(g.to_vec()), options)?;
    Ok(alone - together.aggregate.total)
}

/// Solves every nonempty coalition. Individual costs are solved once per
/// member unless `baseline` supplies them (one per member, in order).
pub fn build_coalition_table(
    s: &Scenario,
    variant: Variant,
    options: &SolverOptions,
    baseline: Option<&[IndividualCost]>,
) -> Result<CoalitionTable, GameError> {
    let members = s.members();
    check_size(members.len())?;
    if variant == Variant::Community && s.consumers().is_empty() {
        return Err(DispatchError::NoConsumers.into());
    }
    let individual = match baseline {
        Some(b) if b.len() != members.len() => {
            return Err(GameError::Baseline {
                expected: members.len(),
                found: b.len(),
            })
        }
        Some(b) => b.to_vec(),
        None => individual_costs(s, options)?,
    };
    let ids = members
        .iter()
        .map(|&m| s.households[m].id.clone())
        .collect();
    let mut table = CoalitionTable {
        variant,
        members,
        ids,
        individual,
        entries: Vec::new(),
    };
    let masks: Vec<u32> = (1..=table.grand_mask()).collect();
    table.entries = masks
        .par_iter()
        .map(|&mask| {
            let g = table.mask_members(mask);
            let sol = solve_problem(s, &variant.problem(g), options)?;
            let (mut alone, mut alone_obj) = (0.0, 0.0);
            for (i, c) in table.individual.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    alone += c.total;
                    alone_obj += c.objective;
                }
            }
            Ok(CoalitionEntry {
                mask,
                individual_sum: alone,
                coalition_cost: sol.aggregate.total,
                worth: alone - sol.aggregate.total,
                objective_worth: alone_obj - sol.lp_objective,
            })
        })
        .collect::<Result<Vec<_>, GameError>>()?;
    Ok(table)
}

/// Shapley values of an `m`-player game given `worth[mask]` for all
/// `2^m` masks, `worth[0]` being the empty coalition.
pub fn shapley_values(m: usize, worth: &[f64]) -> Result<Vec<f64>, GameError> {
    check_size(m)?;
    if worth.len() != 1usize << m {
        return Err(GameError::Incomplete(format!(
            "{} worths for {m} players",
            worth.len()
        )));
    }
    // weight[k] = k!(m−k−1)!/m!
    let mut weight = vec![0.0; m];
    weight[0] = 1.0 / m as f64;
    for k in 1..m {
        weight[k] = weight[k - 1] * k as f64 / (m - k) as f64;
    }
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        *p = (0..worth.len())
            .filter(|mask| mask & bit == 0)
            .map(|mask| weight[mask.count_ones() as usize] * (worth[mask | bit] - worth[mask]))
            .sum();
    }
    Ok(phi)
}

pub fn shapley(table: &CoalitionTable) -> Result<ShapleyAllocation, GameError> {
    let m = table.num_members();
    check_size(m)?;
    let expected = (1usize << m) - 1;
    if table.entries.len() != expected
        || table
            .entries
            .iter()
            .enumerate()
            .any(|(i, e)| e.mask as usize != i + 1)
    {
        return Err(GameError::Incomplete(format!(
            "expected masks 1..={expected} in order, found {} entries",
            table.entries.len()
        )));
    }
    let mut worth = Vec::with_capacity(expected + 1);
    worth.push(0.0);
    worth.extend(table.entries.iter().map(|e| e.worth));
    Ok(ShapleyAllocation {
        members: table.members.clone(),
        ids: table.ids.clone(),
        payoffs: shapley_values(m, &worth)?,
        grand_worth: table.grand_worth(),
    })
}
