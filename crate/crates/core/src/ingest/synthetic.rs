//! Seeded synthetic flights with a known ground truth.
//!
//! Arrival delay is `dep_coef(season) * dep_delay + distance_coef(season) *
//! distance + time_of_day_effect(crs_dep) + noise`, so tests can recompute
//! the truth from the configuration.

use chrono::{Datelike, NaiveDate};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::{ClockTime, FlightRecord};
use crate::airports::{great_circle_miles, AIRPORTS, CARRIERS};
use crate::seasonal::Season;
use crate::{Error, Result, DELAY_THRESHOLD_MINUTES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonCoefficients {
    pub dep_delay: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub count: usize,
    /// Coefficients in [`Season::ALL`] order: winter, spring, summer, fall.
    pub seasons: [SeasonCoefficients; 4],
    /// Standard deviation of the Gaussian arrival noise, minutes.
    pub noise_sd: f64,
    /// Amplitude of the time-of-day term, minutes.
    pub nonlinearity: f64,
    /// Months to draw from.
    pub months: Vec<u8>,
    pub years: Vec<i32>,
    /// Number of carriers drawn from the directory, at most 8.
    pub carriers: usize,
    /// Number of airports drawn from the directory, at most 40.
    pub airports: usize,
    pub cancelled_fraction: f64,
    /// Exact number of records whose arrival label is blanked out.
    pub blanked_labels: usize,
}

impl Default for SyntheticConfig {
    /// The benchmark configuration: 50 000 flights, distinct seasonal
    /// coefficients and a time-of-day effect.
    fn default() -> Self {
        SyntheticConfig {
            count: 50_000,
            seasons: [
                SeasonCoefficients {
                    dep_delay: 1.10,
                    distance: 0.006,
                },
                SeasonCoefficients {
                    dep_delay: 0.85,
                    distance: -0.002,
                },
                SeasonCoefficients {
                    dep_delay: 0.95,
                    distance: 0.010,
                },
                SeasonCoefficients {
                    dep_delay: 0.75,
                    distance: 0.002,
                },
            ],
            noise_sd: 6.0,
            nonlinearity: 12.0,
            months: (1..=12).collect(),
            years: vec![2019, 2020],
            carriers: CARRIERS.len(),
            airports: AIRPORTS.len(),
            cancelled_fraction: 0.01,
            blanked_labels: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn with_count(count: usize) -> Self {
        SyntheticConfig {
            count,
            ..Default::default()
        }
    }

    /// Noise-free, purely linear data with the same coefficients in every
    /// season and nothing cancelled.
    pub fn linear(count: usize, dep_delay: f64, distance: f64) -> Self {
        SyntheticConfig {
            count,
            seasons: [SeasonCoefficients {
                dep_delay,
                distance,
            }; 4],
            noise_sd: 0.0,
            nonlinearity: 0.0,
            cancelled_fraction: 0.0,
            ..Default::default()
        }
    }

    pub fn coefficients(&self, season: Season) -> SeasonCoefficients {
        self.seasons[season.index()]
    }

    /// Noise-free arrival delay for the given inputs.
    pub fn expected_arrival_delay(
        &self,
        month: u8,
        dep_delay: f64,
        distance: f64,
        crs_dep: ClockTime,
    ) -> Result<f64> {
        let c = self.coefficients(Season::of_month(month)?);
        Ok(c.dep_delay * dep_delay
            + c.distance * distance
            + time_of_day_effect(self.nonlinearity, crs_dep.minutes_since_midnight()))
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::arg("record count must be positive"));
        }
        if self.months.is_empty() || self.months.iter().any(|m| !(1..=12).contains(m)) {
            return Err(Error::arg("months must be a non-empty subset of 1-12"));
        }
        if self.years.is_empty() {
            return Err(Error::arg("at least one year is required"));
        }
        if !(1..=CARRIERS.len()).contains(&self.carriers) {
            return Err(Error::arg(format!(
                "carriers must be in 1-{}",
                CARRIERS.len()
            )));
        }
        if !(2..=AIRPORTS.len()).contains(&self.airports) {
            return Err(Error::arg(format!(
                "airports must be in 2-{}",
                AIRPORTS.len()
            )));
        }
        if !(0.0..1.0).contains(&self.cancelled_fraction) {
            return Err(Error::arg("cancelled fraction must be in [0, 1)"));
        }
        if self.blanked_labels > self.count {
            return Err(Error::arg("cannot blank more labels than records"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::arg("noise scale must be non-negative"));
        }
        Ok(())
    }
}

/// Sidecar written next to generated data so ground truth can be recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub generator_version: u32,
    pub seed: u64,
    pub config: SyntheticConfig,
}

impl SyntheticManifest {
    pub fn new(config: &SyntheticConfig, seed: u64) -> Self {
        SyntheticManifest {
            generator_version: 1,
            seed,
            config: config.clone(),
        }
    }
}

/// Smooth daily pattern over scheduled departures between 05:00 and 23:00:
/// one full sine period, zero mean over that window.
pub fn time_of_day_effect(amplitude: f64, minutes_since_midnight: u32) -> f64 {
    if amplitude == 0.0 {
        return 0.0;
    }
    let phase = (f64::from(minutes_since_midnight) - 300.0) / 1080.0;
    amplitude * (std::f64::consts::TAU * phase).sin()
}

fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .and_then(|d| d.pred_opt())
        .map_or(28, |d| d.day())
}

pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<Vec<FlightRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on_time = Normal::new(-2.0, 5.0).expect("valid normal");
    let late = Exp::new(1.0 / 35.0).expect("valid exponential");
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let airports = &AIRPORTS[..config.airports];
    let carriers = &CARRIERS[..config.carriers];

    let mut records = Vec::with_capacity(config.count);
    for _ in 0..config.count {
        let year = config.years[rng.random_range(0..config.years.len())];
        let month = config.months[rng.random_range(0..config.months.len())];
        let day = rng.random_range(1..=days_in_month(year, u32::from(month)));
        let date = NaiveDate::from_ymd_opt(year, u32::from(month), day).expect("valid date");
        let carrier = carriers[rng.random_range(0..carriers.len())];
        let origin = &airports[rng.random_range(0..airports.len())];
        let dest = loop {
            let d = &airports[rng.random_range(0..airports.len())];
            if d.id != origin.id {
                break d;
            }
        };
        let flight_num = rng.random_range(1..3000u32).to_string();
        let distance = great_circle_miles(origin, dest).round();
        let dep_minutes = rng.random_range(60..276u32) * 5;
        let crs_dep = ClockTime::from_minutes(dep_minutes);
        let block = (distance / 8.0).round() as u32 + 30;
        let crs_arr = ClockTime::from_minutes(dep_minutes + block);

        let dep_delay: f64 = if rng.random_bool(0.62) {
            Distribution::<f64>::sample(&on_time, &mut rng).round()
        } else {
            (5.0 + Distribution::<f64>::sample(&late, &mut rng)).round()
        };
        let eps: f64 = noise.sample(&mut rng);
        let cancelled = rng.random_bool(config.cancelled_fraction);

        let (dep, arr, label) = if cancelled {
            (None, None, Some(true))
        } else {
            let arr = config.expected_arrival_delay(month, dep_delay, distance, crs_dep)?
                + config.noise_sd * eps;
            (
                Some(dep_delay),
                Some(arr),
                Some(arr > DELAY_THRESHOLD_MINUTES),
            )
        };

        records.push(FlightRecord {
            year,
            quarter: (month - 1) / 3 + 1,
            month,
            day_of_month: day as u8,
            day_of_week: date.weekday().number_from_monday() as u8,
            flight_num,
            carrier: carrier.code.to_string(),
            origin_airport_id: origin.id,
            dest_airport_id: dest.id,
            dest_wac: dest.wac,
            crs_dep_time: crs_dep,
            crs_arr_time: crs_arr,
            distance,
            dep_delay: dep,
            arr_delay: arr,
            arr_del15: label,
            cancelled,
        });
    }

    if config.blanked_labels > 0 {
        for i in index::sample(&mut rng, config.count, config.blanked_labels) {
            records[i].arr_del15 = None;
        }
    }
    Ok(records)
}
