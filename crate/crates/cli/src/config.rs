use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use smartgrid_coalition::data::{synth_scenario, DataError, RosterSpec, SLOTS_PER_DAY};
use smartgrid_coalition::dispatch::DispatchError;
use smartgrid_coalition::game::{GameError, Variant};
use smartgrid_coalition::horizon::{HorizonError, HorizonOptions, Method, StorageMode};
use smartgrid_coalition::lp::SolverOptions;
use smartgrid_coalition::model::{ModelError, Scenario};

pub const EXIT_OK: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_SOLVE: u8 = 4;
pub const EXIT_AUDIT: u8 = 5;

/// Bad combination of flags or values.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Maps an error chain to the documented exit status.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<ModelError>() || cause.is::<DataError>() {
            return EXIT_INPUT;
        }
        if cause.is::<DispatchError>() || cause.is::<GameError>() {
            return EXIT_SOLVE;
        }
        if let Some(h) = cause.downcast_ref::<HorizonError>() {
            return match h {
                HorizonError::Sweep(_) | HorizonError::NoMethods => EXIT_USAGE,
                HorizonError::Roster { .. } | HorizonError::NoDays => EXIT_INPUT,
                _ => EXIT_SOLVE,
            };
        }
    }
    EXIT_OTHER
}

#[derive(Debug, Parser)]
#[command(
    name = "sgcoal",
    version,
    about = "Cost-sharing simulations for smart-grid communities"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "SGCOAL_OUT", default_value = "sgcoal-out")]
    pub out: PathBuf,
    /// Worker threads for coalition solves (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate consecutive days and report cumulative costs.
    Run(RunArgs),
    /// Repeat the simulation over a grid of α or storage capacities.
    Sweep(SweepArgs),
    /// Coalition table and Shapley payoffs for one day.
    Shapley(ShapleyArgs),
    /// Write a synthetic scenario and its input series.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "synth_seed")]
    pub scenario: Option<PathBuf>,
    /// Generate the default synthetic community with this seed.
    #[arg(long)]
    pub synth_seed: Option<u64>,
    /// Number of days to simulate (default: all).
    #[arg(long)]
    pub days: Option<usize>,
    /// Community discount factor λ = α·ξ.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Minimum saving guaranteed to each consumer, €.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Primal feasibility tolerance of the solver and audits.
    #[arg(long, default_value_t = 1e-7)]
    pub feas_tol: f64,
    #[arg(long, value_enum, default_value_t = StorageModeArg::Independent)]
    pub storage_mode: StorageModeArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StorageModeArg {
    Independent,
    SharedInit,
}

impl From<StorageModeArg> for StorageMode {
    fn from(m: StorageModeArg) -> Self {
        match m {
            StorageModeArg::Independent => StorageMode::Independent,
            StorageModeArg::SharedInit => StorageMode::SharedInit,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// `all` or a comma-separated subset of individual, coalitional,
    /// community.
    #[arg(long, default_value = "all")]
    pub methods: String,
    /// Compute daily coalition tables and Shapley payoffs.
    #[arg(long)]
    pub shapley: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(subcommand)]
    pub kind: SweepKind,
}

#[derive(Debug, Subcommand)]
pub enum SweepKind {
    /// Community method at each α.
    Alpha {
        #[command(flatten)]
        input: InputArgs,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0.1:0.9:0.1")]
        grid: String,
    },
    /// All methods at each per-member storage capacity (kWh).
    Capacity {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "5:20:1")]
        grid: String,
    },
}

#[derive(Debug, Args)]
pub struct ShapleyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Day to analyse (1-based); earlier days are simulated for storage.
    #[arg(long)]
    pub day: usize,
    /// Characteristic function (default: community when consumers exist).
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Resess,
    Community,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Resess => Variant::ResEss,
            VariantArg::Community => Variant::Community,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 31)]
    pub days: usize,
}

/// Seed used when neither a scenario nor a seed is given.
pub const DEFAULT_SEED: u64 = 7;

/// Validated inputs shared by every simulation command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub days: Vec<Scenario>,
    pub options: HorizonOptions,
}

pub fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    if spec.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let mut methods = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        methods.push(part.parse::<Method>().map_err(usage)?);
    }
    if methods.is_empty() {
        return Err(usage("no methods given"));
    }
    methods.sort();
    methods.dedup();
    Ok(methods)
}

/// Parses `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err(usage("empty grid"));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| usage(format!("bad grid value {s:?}")))
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err(usage(format!("grid {spec:?} must be start:stop:step")));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step <= 0.0 || b < a {
            return Err(usage(format!("grid {spec:?} is empty")));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize + 1;
        // Rounded so 0.1 + 2·0.1 prints as 0.3.
        Ok((0..n)
            .map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9)
            .collect())
    } else {
        spec.split(',').map(num).collect()
    }
}

impl InputArgs {
    fn base_scenario(&self) -> Result<Scenario> {
        match (&self.scenario, self.synth_seed) {
            (Some(path), _) => {
                Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
            }
            (None, seed) => {
                let seed = seed.unwrap_or(DEFAULT_SEED);
                Ok(synth_scenario(seed, &RosterSpec::default())
                    .context("generating synthetic scenario")?
                    .scenario)
            }
        }
    }

    /// Loads, overrides and slices the scenario into days.
    pub fn config(&self, methods: Vec<Method>, shapley: bool) -> Result<RunConfig> {
        let uses_community = methods.contains(&Method::Community);
        if (self.alpha.is_some() || self.delta.is_some()) && !uses_community {
            return Err(usage(
                "--alpha and --delta only apply to the community method",
            ));
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(usage(format!("--alpha {a} outside [0, 1]")));
            }
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(usage(format!("--delta {d} must be nonnegative")));
            }
        }
        if !(self.feas_tol > 0.0 && self.feas_tol.is_finite()) {
            return Err(usage("--feas-tol must be positive"));
        }
        if self.days == Some(0) {
            return Err(usage("--days must be at least 1"));
        }

        let mut scenario = self.base_scenario()?;
        if let Some(a) = self.alpha {
            scenario.tariff.alpha = a;
        }
        if let Some(d) = self.delta {
            scenario.prices.consumer_margin = d;
        }
        let mut days = scenario
            .split_days(SLOTS_PER_DAY)
            .context("slicing scenario into days")?;
        if let Some(n) = self.days {
            if n > days.len() {
                bail!(usage(format!(
                    "--days {n} exceeds the {} available",
                    days.len()
                )));
            }
            days.truncate(n);
        }
        Ok(RunConfig {
            days,
            options: HorizonOptions {
                methods,
                shapley,
                storage_mode: self.storage_mode.into(),
                solver: SolverOptions::with_feas_tol(self.feas_tol),
            },
        })
    }
}
