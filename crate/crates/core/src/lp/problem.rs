use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use super::LpError;

/// Role of a decision variable inside a dispatch problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantity {
    /// Energy bought from the utility, `b`.
    GridPurchase,
    /// Positive part of the net storage charge, `r⁺`.
    ChargeUp,
    /// Negative part of the net storage charge, `r⁻`.
    ChargeDown,
    /// State of charge at the end of the slot, `s`.
    StateOfCharge,
    /// Positive part of the net exchange with the community, `a⁺`.
    ExportUp,
    /// Negative part of the net exchange with the community, `a⁻`.
    ExportDown,
    /// Unsplit (sign-constrained) exchange of a consumer, `a_p ≤ 0`.
    Exchange,
    /// Anonymous column of a hand-built problem.
    Generic,
}

impl Quantity {
    pub fn short_name(self) -> &'static str {
        match self {
            Quantity::GridPurchase => "b",
            Quantity::ChargeUp => "r+",
            Quantity::ChargeDown => "r-",
            Quantity::StateOfCharge => "s",
            Quantity::ExportUp => "a+",
            Quantity::ExportDown => "a-",
            Quantity::Exchange => "a",
            Quantity::Generic => "x",
        }
    }
}

/// Registry key of one column: (household index, quantity, slot).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub household: usize,
    pub quantity: Quantity,
    pub slot: usize,
}

impl VarKey {
    pub fn new(household: usize, quantity: Quantity, slot: usize) -> Self {
        Self {
            household,
            quantity,
            slot,
        }
    }

    pub fn generic(column: usize) -> Self {
        Self::new(0, Quantity::Generic, column)
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[h{},t{}]",
            self.quantity.short_name(),
            self.household,
            self.slot
        )
    }
}

/// Bidirectional map between variable keys and column indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarRegistry {
    keys: Vec<VarKey>,
    index: BTreeMap<VarKey, usize>,
}

impl VarRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry of `n` anonymous columns.
    pub fn generic(n: usize) -> Self {
        let mut reg = Self::new();
        for j in 0..n {
            reg.push(VarKey::generic(j));
        }
        reg
    }

    /// Appends a key and returns its column. A duplicate key is kept in the
    /// column list but not re-indexed, which `StandardLp::validate` reports.
    pub fn push(&mut self, key: VarKey) -> usize {
        let col = self.keys.len();
        self.keys.push(key);
        self.index.entry(key).or_insert(col);
        col
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn column(&self, key: &VarKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn key(&self, column: usize) -> Option<&VarKey> {
        self.keys.get(column)
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }
}

/// Sparse constraint row `coefs · x (= or ≤) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub coefs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coefs, rhs }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// Minimization problem `min c·x + offset` subject to equality rows,
/// `≤` rows and per-variable bounds `lower ≤ x ≤ upper`.
///
/// Lower bounds must be finite; upper bounds may be `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    /// Constant added to `c·x`; keeps penalty constants out of the columns.
    pub objective_offset: f64,
    pub eq_rows: Vec<SparseRow>,
    pub ub_rows: Vec<SparseRow>,
    pub var_bounds: Vec<(f64, f64)>,
    pub var_names: VarRegistry,
}

impl StandardLp {
    /// Problem with `n` anonymous columns, bounds `[0, ∞)` and zero costs.
    pub fn with_generic_vars(n: usize) -> Self {
        Self {
            num_vars: n,
            objective: vec![0.0; n],
            objective_offset: 0.0,
            eq_rows: Vec::new(),
            ub_rows: Vec::new(),
            var_bounds: vec![(0.0, f64::INFINITY); n],
            var_names: VarRegistry::generic(n),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.eq_rows.len() + self.ub_rows.len()
    }

    /// Checks the structural invariants every solver input must satisfy.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars;
        let structural = |msg: String| Err(LpError::Structural(msg));
        if self.objective.len() != n {
            return structural(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                n
            ));
        }
        if self.var_bounds.len() != n {
            return structural(format!(
                "{} bound pairs for {} variables",
                self.var_bounds.len(),
                n
            ));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return structural(format!("objective coefficient {j} is not finite"));
        }
        if !self.objective_offset.is_finite() {
            return structural("objective offset is not finite".into());
        }
        for (j, &(lo, hi)) in self.var_bounds.iter().enumerate() {
            if !lo.is_finite() {
                return structural(format!("lower bound of column {j} is not finite"));
            }
            if hi.is_nan() || lo > hi {
                return structural(format!("column {j} has bounds [{lo}, {hi}]"));
            }
        }
        let rows = self
            .eq_rows
            .iter()
            .map(|r| ("equality", r))
            .chain(self.ub_rows.iter().map(|r| ("inequality", r)));
        for (i, (kind, row)) in rows.enumerate() {
            if !row.rhs.is_finite() {
                return structural(format!("{kind} row {i} has a non-finite rhs"));
            }
            for &(j, a) in &row.coefs {
                if j >= n {
                    return structural(format!("{kind} row {i} references column {j} >= {n}"));
                }
                if !a.is_finite() {
                    return structural(format!("{kind} row {i} has a non-finite coefficient"));
                }
            }
        }
        if self.var_names.len() != n {
            return structural(format!(
                "registry names {} columns, problem has {}",
                self.var_names.len(),
                n
            ));
        }
        for (j, key) in self.var_names.keys().iter().enumerate() {
            if self.var_names.column(key) != Some(j) {
                return structural(format!("duplicate variable name {key}"));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Fixed-format text listing used for golden-file comparisons.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "LP vars={} eq={} ub={}",
            self.num_vars,
            self.eq_rows.len(),
            self.ub_rows.len()
        );
        let _ = writeln!(out, "OBJ offset={:+.9e}", self.objective_offset);
        for (j, key) in self.var_names.keys().iter().enumerate() {
            let (lo, hi) = self.var_bounds[j];
            let _ = writeln!(
                out,
                "VAR {:>4} {:<14} cost={:+.9e} lo={:+.9e} hi={}",
                j,
                key.to_string(),
                self.objective[j],
                lo,
                fmt_bound(hi)
            );
        }
        for (i, row) in self.eq_rows.iter().enumerate() {
            let _ = writeln!(out, "EQ  {:>4} {} = {:+.9e}", i, fmt_row(row), row.rhs);
        }
        for (i, row) in self.ub_rows.iter().enumerate() {
            let _ = writeln!(out, "UB  {:>4} {} <= {:+.9e}", i, fmt_row(row), row.rhs);
        }
        out
    }
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else {
        format!("{v:+.9e}")
    }
}

fn fmt_row(row: &SparseRow) -> String {
    row.coefs
        .iter()
        .map(|&(j, a)| format!("{a:+.9e}*x{j}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Incremental construction of a [`StandardLp`] with named columns.
#[derive(Debug, Default)]
pub struct LpBuilder {
    objective: Vec<f64>,
    offset: f64,
    bounds: Vec<(f64, f64)>,
    names: VarRegistry,
    eq_rows: Vec<SparseRow>,
    ub_rows: Vec<SparseRow>,
}

impl LpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, key: VarKey, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lower, upper));
        self.names.push(key)
    }

    pub fn add_cost(&mut self, column: usize, cost: f64) {
        self.objective[column] += cost;
    }

    pub fn add_offset(&mut self, value: f64) {
        self.offset += value;
    }

    pub fn add_eq(&mut self, coefs: Vec<(usize, f64)>, rhs: f64) {
        self.eq_rows.push(SparseRow::new(coefs, rhs));
    }

    pub fn add_le(&mut self, coefs: Vec<(usize, f64)>, rhs: f64) {
        self.ub_rows.push(SparseRow::new(coefs, rhs));
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn build(self) -> StandardLp {
        StandardLp {
            num_vars: self.objective.len(),
            objective: self.objective,
            objective_offset: self.offset,
            eq_rows: self.eq_rows,
            ub_rows: self.ub_rows,
            var_bounds: self.bounds,
            var_names: self.names,
        }
    }
}
