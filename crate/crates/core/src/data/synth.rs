//! Seeded synthetic community: hourly prices, site wind speed and
//! household demand, turned into a [`Scenario`] through the turbine model.
//!
//! Demand uses a canonical residential day (night trough, morning and
//! evening peaks) scaled by household size. Each prosumer sees the site wind
//! with its own multiplicative variation on output energy.

use chrono::{DateTime, TimeDelta, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::series::{SeriesColumn, SeriesFile, SeriesKind};
use super::wind::{wind_power_kwh, WindTurbineSpec};
use super::DataError;
use crate::model::{
    Household, HouseholdKind, PriceParams, Scenario, StorageSpec, Tariff, TimeGrid,
};

pub const SLOTS_PER_DAY: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: String,
    pub kind: HouseholdKind,
    pub inhabitants: u32,
}

/// Community layout and parameters for synthetic generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterSpec {
    pub households: Vec<RosterEntry>,
    pub days: usize,
    pub start: DateTime<Utc>,
    /// Storage of every member.
    pub storage: StorageSpec,
    pub turbine: WindTurbineSpec,
    /// Half-width of the uniform multiplicative variation applied to each
    /// prosumer's renewable output.
    pub renewable_jitter: f64,
    pub alpha: f64,
    pub prices: PriceParams,
}

impl Default for RosterSpec {
    /// Nine households: three prosumers, three storage owners and three
    /// consumers over 31 days.
    fn default() -> Self {
        let inhabitants = [3, 4, 4, 2, 5, 4, 3, 4, 2];
        let households = inhabitants
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let (kind, id) = match i {
                    0..=2 => (HouseholdKind::Prosumer, format!("m{}", i + 1)),
                    3..=5 => (HouseholdKind::StorageOwner, format!("m{}", i + 1)),
                    _ => (HouseholdKind::Consumer, format!("p{}", i - 5)),
                };
                RosterEntry {
                    id,
                    kind,
                    inhabitants: n,
                }
            })
            .collect();
        Self {
            households,
            days: 31,
            start: Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap(),
            storage: StorageSpec::new(5.0, 2.0, 0.001),
            turbine: WindTurbineSpec::default(),
            renewable_jitter: 0.1,
            alpha: 0.9,
            prices: PriceParams {
                storage_cycle_price: 1e-4,
                waste_penalty_price: 1e-3,
                transfer_price: 1e-4,
                consumer_margin: 0.0,
            },
        }
    }
}

/// Raw hourly inputs as they would be read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSeries {
    pub price: SeriesFile,
    pub wind: SeriesFile,
    pub demand: SeriesFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub scenario: Scenario,
    pub series: SynthSeries,
    /// Per household, the wind speed whose cubic-law output equals its
    /// renewable profile; empty for households without generation.
    pub effective_wind_ms: Vec<Vec<f64>>,
}

// Independent RNG streams so each series is stable under edits to another.
const PRICE_STREAM: u64 = 1;
const WIND_STREAM: u64 = 2;
const DEMAND_STREAM: u64 = 3;
const JITTER_STREAM: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (v * scale).round() / scale
}

fn gaussian(r: &mut ChaCha8Rng, sd: f64) -> f64 {
    Normal::new(0.0, sd).expect("positive sd").sample(r)
}

/// Relative price level per hour of day.
fn price_shape(hour: usize) -> f64 {
    const SHAPE: [f64; 24] = [
        0.82, 0.78, 0.76, 0.75, 0.76, 0.82, 0.95, 1.12, 1.22, 1.18, 1.10, 1.05, 1.02, 1.00, 0.99,
        1.00, 1.06, 1.18, 1.28, 1.24, 1.12, 1.00, 0.92, 0.86,
    ];
    SHAPE[hour]
}

/// Share of daily household consumption per hour of day (sums to 1).
fn demand_shape(hour: usize) -> f64 {
    const SHAPE: [f64; 24] = [
        0.025, 0.021, 0.019, 0.018, 0.018, 0.022, 0.035, 0.055, 0.060, 0.048, 0.040, 0.038, 0.040,
        0.037, 0.035, 0.037, 0.045, 0.060, 0.072, 0.075, 0.070, 0.060, 0.045, 0.035,
    ];
    SHAPE[hour] / SHAPE.iter().sum::<f64>()
}

fn timestamps(roster: &RosterSpec) -> Vec<DateTime<Utc>> {
    (0..roster.days * SLOTS_PER_DAY)
        .map(|k| roster.start + TimeDelta::hours(k as i64))
        .collect()
}

pub fn synth_series(seed: u64, roster: &RosterSpec) -> SynthSeries {
    let ts = timestamps(roster);
    let n = ts.len();

    let mut r = rng(seed, PRICE_STREAM);
    let mut level = 0.042;
    let mut price = Vec::with_capacity(n);
    for k in 0..n {
        let hour = k % SLOTS_PER_DAY;
        if hour == 0 && k > 0 {
            level = 0.042 + 0.6 * (level - 0.042) + gaussian(&mut r, 0.006);
        }
        let v = level * price_shape(hour) * (1.0 + gaussian(&mut r, 0.05));
        price.push(round_to(v.clamp(0.01, 0.12), 5));
    }

    let mut r = rng(seed, WIND_STREAM);
    let mut anomaly = 0.0;
    let mut wind = Vec::with_capacity(n);
    for k in 0..n {
        let hour = (k % SLOTS_PER_DAY) as f64;
        anomaly = 0.92 * anomaly + gaussian(&mut r, 0.55);
        let diurnal = 0.6 * (2.0 * std::f64::consts::PI * (hour - 8.0) / 24.0).sin();
        wind.push(round_to((4.5 + diurnal + anomaly).clamp(0.0, 20.0), 2));
    }

    let mut r = rng(seed, DEMAND_STREAM);
    let mut demand = Vec::new();
    for h in &roster.households {
        let daily = 2.5 + 1.6 * f64::from(h.inhabitants);
        let mut values = Vec::with_capacity(n);
        let mut day_factor = 1.0;
        for k in 0..n {
            let hour = k % SLOTS_PER_DAY;
            if hour == 0 {
                day_factor = 1.0 + gaussian(&mut r, 0.08);
            }
            let v = daily * demand_shape(hour) * day_factor * (1.0 + gaussian(&mut r, 0.15));
            values.push(round_to(v.max(0.02), 3));
        }
        demand.push(SeriesColumn {
            household: Some(h.id.clone()),
            values,
        });
    }

    SynthSeries {
        price: SeriesFile::single(SeriesKind::Price, ts.clone(), price),
        wind: SeriesFile::single(SeriesKind::Wind, ts.clone(), wind),
        demand: SeriesFile {
            kind: SeriesKind::Demand,
            timestamps: ts,
            columns: demand,
        },
    }
}

/// Combines price, site wind and demand series into a scenario. Renewable
/// output of prosumer `m` at slot `t` is the turbine output at the site wind
/// scaled by a seeded factor in `[1 − j, 1 + j]`; the factor is applied as
/// an equivalent change of wind speed so the cubic law holds exactly.
pub fn assemble_scenario(
    roster: &RosterSpec,
    series: &SynthSeries,
    seed: u64,
) -> Result<(Scenario, Vec<Vec<f64>>), DataError> {
    roster.turbine.validate()?;
    let n = series.price.len();
    if series.wind.len() != n || series.demand.len() != n {
        return Err(DataError::Shape(format!(
            "price, wind and demand lengths differ ({n}, {}, {})",
            series.wind.len(),
            series.demand.len()
        )));
    }
    if series.price.timestamps != series.wind.timestamps
        || series.price.timestamps != series.demand.timestamps
    {
        return Err(DataError::Shape("series time axes differ".into()));
    }
    series.price.days(SLOTS_PER_DAY)?;
    let jitter = roster.renewable_jitter;
    if !(0.0..1.0).contains(&jitter) {
        return Err(DataError::Shape(format!(
            "renewable jitter {jitter} outside [0, 1)"
        )));
    }

    let grid = TimeGrid::hourly(n);
    let mut r = rng(seed, JITTER_STREAM);
    let mut households = Vec::new();
    let mut effective = Vec::new();
    for h in &roster.households {
        let demand = series
            .demand
            .column(&h.id)
            .ok_or_else(|| DataError::Shape(format!("no demand column for {}", h.id)))?
            .to_vec();
        let (renewable, wind) = if h.kind == HouseholdKind::Prosumer {
            let mut w = Vec::with_capacity(n);
            let mut v_eff = Vec::with_capacity(n);
            for &v in series.wind.values() {
                let factor: f64 = if jitter > 0.0 {
                    r.random_range(1.0 - jitter..=1.0 + jitter)
                } else {
                    1.0
                };
                let v = v * factor.cbrt();
                w.push(wind_power_kwh(v, &roster.turbine, grid.slot_hours)?);
                v_eff.push(v);
            }
            (w, v_eff)
        } else {
            (vec![0.0; n], Vec::new())
        };
        households.push(Household {
            id: h.id.clone(),
            kind: h.kind,
            demand_kwh: demand,
            renewable_kwh: renewable,
            storage: h.kind.is_member().then_some(roster.storage),
        });
        effective.push(wind);
    }
    let scenario = Scenario {
        grid,
        households,
        tariff: Tariff {
            grid_price: series.price.values().to_vec(),
            alpha: roster.alpha,
        },
        prices: roster.prices,
    };
    Ok((scenario, effective))
}

/// Deterministic synthetic dataset for `seed`.
pub fn synth_scenario(seed: u64, roster: &RosterSpec) -> Result<SynthDataset, DataError> {
    let series = synth_series(seed, roster);
    let (scenario, effective_wind_ms) = assemble_scenario(roster, &series, seed)?;
    Ok(SynthDataset {
        scenario,
        series,
        effective_wind_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roster_is_three_three_three() {
        let d = synth_scenario(7, &RosterSpec::default()).unwrap();
        let s = &d.scenario;
        assert_eq!(s.households.len(), 9);
        let count = |k| s.households.iter().filter(|h| h.kind == k).count();
        assert_eq!(count(HouseholdKind::Prosumer), 3);
        assert_eq!(count(HouseholdKind::StorageOwner), 3);
        assert_eq!(count(HouseholdKind::Consumer), 3);
        assert_eq!(s.grid.slots, 744);
        for h in &s.households {
            if h.kind == HouseholdKind::Prosumer {
                assert!(h.renewable_kwh.iter().any(|&w| w > 0.0));
            } else {
                assert!(h.renewable_kwh.iter().all(|&w| w == 0.0));
            }
            assert_eq!(h.storage.is_some(), h.kind.is_member());
        }
        assert!(crate::model::validate_scenario(s).is_empty());
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = synth_scenario(11, &RosterSpec::default()).unwrap();
        let b = synth_scenario(11, &RosterSpec::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scenario.to_json().unwrap(), b.scenario.to_json().unwrap());
        let c = synth_scenario(12, &RosterSpec::default()).unwrap();
        assert_ne!(a.scenario, c.scenario);
    }

    #[test]
    fn profiles_are_plausible() {
        let d = synth_scenario(7, &RosterSpec::default()).unwrap();
        let price = d.series.price.values();
        assert!(price.iter().all(|&p| (0.01..=0.12).contains(&p)));
        let mean_price = price.iter().sum::<f64>() / price.len() as f64;
        assert!((0.02..0.07).contains(&mean_price), "{mean_price}");
        let wind = d.series.wind.values();
        let mean_wind = wind.iter().sum::<f64>() / wind.len() as f64;
        assert!((3.0..6.0).contains(&mean_wind), "{mean_wind}");
        for col in &d.series.demand.columns {
            assert!(col.values.iter().all(|&u| u > 0.0));
        }
    }

    #[test]
    fn renewable_follows_cubic_law_of_effective_wind() {
        let roster = RosterSpec::default();
        let d = synth_scenario(3, &roster).unwrap();
        for (h, v) in d.scenario.households.iter().zip(&d.effective_wind_ms) {
            if h.kind != HouseholdKind::Prosumer {
                continue;
            }
            for ((&w, &v_eff), &v_site) in h.renewable_kwh.iter().zip(v).zip(d.series.wind.values())
            {
                assert_eq!(w, wind_power_kwh(v_eff, &roster.turbine, 1.0).unwrap());
                let site = wind_power_kwh(v_site, &roster.turbine, 1.0).unwrap();
                assert!(w >= site * 0.9 - 1e-12 && w <= site * 1.1 + 1e-12);
            }
        }
    }

    #[test]
    fn zero_jitter_uses_site_wind() {
        let roster = RosterSpec {
            renewable_jitter: 0.0,
            days: 1,
            ..RosterSpec::default()
        };
        let d = synth_scenario(5, &roster).unwrap();
        let site = d.series.wind.values();
        assert_eq!(d.effective_wind_ms[0], site);
        let expected: Vec<f64> = site
            .iter()
            .map(|&v| wind_power_kwh(v, &roster.turbine, 1.0).unwrap())
            .collect();
        assert_eq!(d.scenario.households[0].renewable_kwh, expected);
    }

    #[test]
    fn mismatched_series_are_rejected() {
        let roster = RosterSpec {
            days: 1,
            ..RosterSpec::default()
        };
        let mut series = synth_series(1, &roster);
        series.wind.timestamps.pop();
        series.wind.columns[0].values.pop();
        assert!(matches!(
            assemble_scenario(&roster, &series, 1),
            Err(DataError::Shape(_))
        ));
    }
}
