//! Community, tariff and horizon types shared by every other module.

use std::collections::BTreeSet;
use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

/// Version written to and required from scenario documents.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("scenario document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("invalid scenario: {}", join_violations(.0))]
    Invalid(Vec<ScenarioViolation>),
    #[error("cannot split {slots} slots into days of {per_day}")]
    DaySplit { slots: usize, per_day: usize },
}

fn join_violations(v: &[ScenarioViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub slots: usize,
    #[serde(default = "one_hour")]
    pub slot_hours: f64,
}

fn one_hour() -> f64 {
    1.0
}

impl TimeGrid {
    pub fn hourly(slots: usize) -> Self {
        Self {
            slots,
            slot_hours: 1.0,
        }
    }
}

/// Battery of an 𝓜-household. `rate_kwh` bounds both charge and discharge
/// per slot; `leakage` is the fraction of stored energy lost per slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageSpec {
    pub capacity_kwh: f64,
    pub rate_kwh: f64,
    pub leakage: f64,
    pub initial_kwh: f64,
}

impl StorageSpec {
    pub fn new(capacity_kwh: f64, rate_kwh: f64, leakage: f64) -> Self {
        Self {
            capacity_kwh,
            rate_kwh,
            leakage,
            initial_kwh: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HouseholdKind {
    /// Owns renewable generation and storage.
    Prosumer,
    /// Owns storage only.
    StorageOwner,
    /// Owns neither; may buy from the coalition.
    Consumer,
}

impl HouseholdKind {
    pub fn is_member(self) -> bool {
        !matches!(self, HouseholdKind::Consumer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Household {
    pub id: String,
    pub kind: HouseholdKind,
    pub demand_kwh: Vec<f64>,
    pub renewable_kwh: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<StorageSpec>,
}

impl Household {
    /// Storage of a member; zero-capacity storage for consumers.
    pub fn storage_or_empty(&self) -> StorageSpec {
        self.storage.unwrap_or(StorageSpec::new(0.0, 0.0, 0.0))
    }

    /// Cost of covering all demand from the utility.
    pub fn utility_only_cost(&self, grid_price: &[f64]) -> f64 {
        self.demand_kwh
            .iter()
            .zip(grid_price)
            .map(|(u, xi)| u * xi)
            .sum()
    }
}

/// Utility price `ξ` and the community discount `α`; the community price
/// is always `λ(t) = α·ξ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    pub grid_price: Vec<f64>,
    pub alpha: f64,
}

impl Tariff {
    pub fn community_price(&self, slot: usize) -> f64 {
        self.alpha * self.grid_price[slot]
    }

    pub fn community_prices(&self) -> Vec<f64> {
        self.grid_price.iter().map(|x| self.alpha * x).collect()
    }
}

/// Per-kWh prices of storage cycling (π), wasted renewable energy (σ) and
/// transfers (τ), plus the savings margin δ (€) required of every consumer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceParams {
    pub storage_cycle_price: f64,
    pub waste_penalty_price: f64,
    pub transfer_price: f64,
    #[serde(default)]
    pub consumer_margin: f64,
}

impl Default for PriceParams {
    fn default() -> Self {
        Self {
            storage_cycle_price: 1e-4,
            waste_penalty_price: 1e-3,
            transfer_price: 1e-4,
            consumer_margin: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub households: Vec<Household>,
    pub tariff: Tariff,
    pub prices: PriceParams,
}

#[derive(Serialize, Deserialize)]
struct ScenarioDocument {
    schema_version: u32,
    #[serde(flatten)]
    scenario: Scenario,
}

impl Scenario {
    /// Indices of 𝓜 (prosumers and storage owners), in roster order.
    pub fn members(&self) -> Vec<usize> {
        (0..self.households.len())
            .filter(|&i| self.households[i].kind.is_member())
            .collect()
    }

    /// Indices of 𝒫 (pure consumers), in roster order.
    pub fn consumers(&self) -> Vec<usize> {
        (0..self.households.len())
            .filter(|&i| !self.households[i].kind.is_member())
            .collect()
    }

    pub fn household_index(&self, id: &str) -> Option<usize> {
        self.households.iter().position(|h| h.id == id)
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        let doc = ScenarioDocument {
            schema_version: SCHEMA_VERSION,
            scenario: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses a scenario document; does not validate the contents.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ScenarioDocument = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(ModelError::SchemaVersion {
                found: doc.schema_version,
            });
        }
        Ok(doc.scenario)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Reads and validates a scenario document.
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let scenario = Self::from_json(&std::fs::read_to_string(path)?)?;
        let violations = validate_scenario(&scenario);
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        Ok(scenario)
    }

    /// Cuts a long scenario into consecutive periods of `per_day` slots.
    /// Every period starts from the initial storage of `self`.
    pub fn split_days(&self, per_day: usize) -> Result<Vec<Scenario>, ModelError> {
        let slots = self.grid.slots;
        if per_day == 0 || !slots.is_multiple_of(per_day) {
            return Err(ModelError::DaySplit { slots, per_day });
        }
        Ok((0..slots / per_day)
            .map(|d| self.window(d * per_day, per_day))
            .collect())
    }

    fn window(&self, start: usize, len: usize) -> Scenario {
        let cut = |v: &[f64]| v[start..start + len].to_vec();
        Scenario {
            grid: TimeGrid {
                slots: len,
                slot_hours: self.grid.slot_hours,
            },
            households: self
                .households
                .iter()
                .map(|h| Household {
                    id: h.id.clone(),
                    kind: h.kind,
                    demand_kwh: cut(&h.demand_kwh),
                    renewable_kwh: cut(&h.renewable_kwh),
                    storage: h.storage,
                })
                .collect(),
            tariff: Tariff {
                grid_price: cut(&self.tariff.grid_price),
                alpha: self.tariff.alpha,
            },
            prices: self.prices,
        }
    }

    /// Copy with the given initial storage per member (indexed like
    /// [`Scenario::members`]).
    pub fn with_initial_storage(&self, initial: &[f64]) -> Scenario {
        let mut out = self.clone();
        for (&idx, &s0) in self.members().iter().zip(initial) {
            if let Some(st) = out.households[idx].storage.as_mut() {
                st.initial_kwh = s0;
            }
        }
        out
    }

    pub fn initial_storage(&self) -> Vec<f64> {
        self.members()
            .iter()
            .map(|&i| self.households[i].storage_or_empty().initial_kwh)
            .collect()
    }

    pub fn with_alpha(&self, alpha: f64) -> Scenario {
        let mut out = self.clone();
        out.tariff.alpha = alpha;
        out
    }

    /// Copy in which every member's storage has capacity `capacity_kwh`;
    /// initial levels are clipped to the new capacity.
    pub fn with_member_capacity(&self, capacity_kwh: f64) -> Scenario {
        let mut out = self.clone();
        for h in out.households.iter_mut() {
            if let Some(st) = h.storage.as_mut() {
                st.capacity_kwh = capacity_kwh;
                st.initial_kwh = st.initial_kwh.min(capacity_kwh);
            }
        }
        out
    }
}

/// One failed invariant of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioViolation {
    pub household: Option<String>,
    pub message: String,
}

impl fmt::Display for ScenarioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.household {
            Some(id) => write!(f, "household {id}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn nonneg_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite() && *x >= 0.0)
}

/// Checks every scenario invariant; an empty list means the scenario is
/// valid. A zero waste penalty is legal but logged as a warning.
pub fn validate_scenario(s: &Scenario) -> Vec<ScenarioViolation> {
    let mut out = Vec::new();
    let mut global = |msg: String| {
        out.push(ScenarioViolation {
            household: None,
            message: msg,
        })
    };
    let t = s.grid.slots;
    if t < 1 {
        global("time grid needs at least one slot".into());
    }
    if !(s.grid.slot_hours > 0.0 && s.grid.slot_hours.is_finite()) {
        global(format!(
            "slot_hours must be positive, got {}",
            s.grid.slot_hours
        ));
    }
    if s.households.is_empty() {
        global("scenario has no households".into());
    }
    if s.tariff.grid_price.len() != t {
        global(format!(
            "grid price has {} slots, expected {t}",
            s.tariff.grid_price.len()
        ));
    }
    if !nonneg_finite(&s.tariff.grid_price) {
        global("grid prices must be finite and nonnegative".into());
    }
    if !(0.0..=1.0).contains(&s.tariff.alpha) {
        global(format!("alpha must lie in [0, 1], got {}", s.tariff.alpha));
    }
    let p = &s.prices;
    for (name, v) in [
        ("storage_cycle_price", p.storage_cycle_price),
        ("waste_penalty_price", p.waste_penalty_price),
        ("transfer_price", p.transfer_price),
        ("consumer_margin", p.consumer_margin),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            global(format!("{name} must be finite and nonnegative, got {v}"));
        }
    }
    if p.waste_penalty_price == 0.0 {
        warn!("waste_penalty_price is zero; surplus renewable energy is not discouraged");
    }

    let mut seen = BTreeSet::new();
    for h in &s.households {
        let mut bad = |msg: String| {
            out.push(ScenarioViolation {
                household: Some(h.id.clone()),
                message: msg,
            })
        };
        if !seen.insert(h.id.as_str()) {
            bad("duplicate household id".into());
        }
        if h.demand_kwh.len() != t {
            bad(format!(
                "demand has {} slots, expected {t}",
                h.demand_kwh.len()
            ));
        }
        if h.renewable_kwh.len() != t {
            bad(format!(
                "renewable profile has {} slots, expected {t}",
                h.renewable_kwh.len()
            ));
        }
        if !nonneg_finite(&h.demand_kwh) {
            bad("demand must be finite and nonnegative".into());
        }
        if !nonneg_finite(&h.renewable_kwh) {
            bad("renewable production must be finite and nonnegative".into());
        }
        let has_renewable = h.renewable_kwh.iter().any(|&w| w != 0.0);
        match (h.kind, &h.storage) {
            (HouseholdKind::Prosumer, None) | (HouseholdKind::StorageOwner, None) => {
                bad(format!("{:?} must own storage", h.kind))
            }
            (HouseholdKind::Consumer, Some(_)) => bad("consumer must not own storage".into()),
            _ => {}
        }
        if has_renewable && h.kind != HouseholdKind::Prosumer {
            bad(format!(
                "{:?} must have an all-zero renewable profile",
                h.kind
            ));
        }
        if let Some(st) = &h.storage {
            if !(st.capacity_kwh.is_finite() && st.capacity_kwh >= 0.0) {
                bad(format!("storage capacity {} is invalid", st.capacity_kwh));
            }
            if !(st.rate_kwh.is_finite() && st.rate_kwh >= 0.0) {
                bad(format!("storage rate {} is invalid", st.rate_kwh));
            }
            if !(0.0..1.0).contains(&st.leakage) {
                bad(format!("storage leakage {} outside [0, 1)", st.leakage));
            }
            if !(st.initial_kwh >= 0.0 && st.initial_kwh <= st.capacity_kwh) {
                bad(format!(
                    "initial storage {} outside [0, {}]",
                    st.initial_kwh, st.capacity_kwh
                ));
            }
        }
    }
    out
}

/// Itemized euro costs of one household or a group. `total` excludes the
/// σ-penalty, which is a modeling device rather than money paid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub grid_cost: f64,
    pub storage_cost: f64,
    pub operation_cost: f64,
    pub purchase_revenue: f64,
    pub purchase_cost: f64,
    pub penalty_charge: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(
        grid_cost: f64,
        storage_cost: f64,
        operation_cost: f64,
        purchase_revenue: f64,
        purchase_cost: f64,
        penalty_charge: f64,
    ) -> Self {
        Self {
            grid_cost,
            storage_cost,
            operation_cost,
            purchase_revenue,
            purchase_cost,
            penalty_charge,
            total: grid_cost + storage_cost + operation_cost - purchase_revenue + purchase_cost,
        }
    }

    /// Monetary total plus the penalty; what the LP objective minimizes.
    pub fn objective_equivalent(&self) -> f64 {
        self.total + self.penalty_charge
    }
}

impl Add for CostBreakdown {
    type Output = CostBreakdown;

    fn add(self, o: CostBreakdown) -> CostBreakdown {
        CostBreakdown::new(
            self.grid_cost + o.grid_cost,
            self.storage_cost + o.storage_cost,
            self.operation_cost + o.operation_cost,
            self.purchase_revenue + o.purchase_revenue,
            self.purchase_cost + o.purchase_cost,
            self.penalty_charge + o.penalty_charge,
        )
    }
}

impl Sum for CostBreakdown {
    fn sum<I: Iterator<Item = CostBreakdown>>(iter: I) -> Self {
        iter.fold(CostBreakdown::default(), |a, b| a + b)
    }
}

/// Decoded schedule of one household. Sign conventions: `r > 0` charges the
/// storage, `a > 0` gives energy to the community.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HouseholdDispatch {
    pub household: usize,
    pub id: String,
    pub kind: HouseholdKind,
    pub grid_purchase: Vec<f64>,
    pub storage_charge: Vec<f64>,
    pub state_of_charge: Vec<f64>,
    pub exchange: Vec<f64>,
    pub cost: CostBreakdown,
}

impl HouseholdDispatch {
    pub fn terminal_storage(&self) -> f64 {
        self.state_of_charge.last().copied().unwrap_or(0.0)
    }
}

/// Result of one solved dispatch problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchSolution {
    /// Participating households: members first, then consumers.
    pub households: Vec<HouseholdDispatch>,
    /// Sum over participating 𝓜-members; equals `c^indiv`, `c^ResEss` or
    /// `c^community` depending on the problem.
    pub aggregate: CostBreakdown,
    /// Sum over participating consumers (zero when none take part).
    pub consumer_aggregate: CostBreakdown,
    pub lp_objective: f64,
    pub iterations: usize,
}

impl DispatchSolution {
    pub fn household(&self, index: usize) -> Option<&HouseholdDispatch> {
        self.households.iter().find(|h| h.household == index)
    }
}
