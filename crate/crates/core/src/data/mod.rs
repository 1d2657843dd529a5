//! Input series, the turbine model and synthetic community generation.

use std::path::Path;

mod series;
mod synth;
mod wind;

pub use series::{load_series, read_series, SeriesColumn, SeriesFile, SeriesKind};
pub use synth::{
    assemble_scenario, synth_scenario, synth_series, RosterEntry, RosterSpec, SynthDataset,
    SynthSeries, SLOTS_PER_DAY,
};
pub use wind::{wind_power_kwh, WindTurbineSpec};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: timestamp is not after the previous one")]
    NonMonotone { line: u64 },
    #[error("line {line}: negative value {value}")]
    Negative { line: u64, value: f64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("series shape: {0}")]
    Shape(String),
    #[error("wind speed must be nonnegative, got {0}")]
    NegativeWindSpeed(f64),
    #[error("invalid turbine: {0}")]
    InvalidTurbine(String),
}

impl DataError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
