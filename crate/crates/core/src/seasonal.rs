//! Seasonal model: a fixed depth-one tree routes each flight by the season
//! of its month to one of four independently fitted linear regressions.

use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::carrier_origin::{FEATURES, MIN_TRAINING_RECORDS};
use crate::ingest::FlightRecord;
use crate::numerics::{fit_ols, predict_linear, LinearModel};
use crate::{Error, Result};

/// Meteorological seasons: December to February is winter, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Fall,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Fall];

    pub fn of_month(month: u8) -> Result<Season> {
        match month {
            12 | 1 | 2 => Ok(Season::Winter),
            3..=5 => Ok(Season::Spring),
            6..=8 => Ok(Season::Summer),
            9..=11 => Ok(Season::Fall),
            _ => Err(Error::arg(format!("month {month} out of range 1-12"))),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Fall => "fall",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn season_of(month: u8) -> Result<Season> {
    Season::of_month(month)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonFit {
    pub season: Season,
    pub model: LinearModel,
    /// Usable training records that fell in this season.
    pub count: usize,
    /// The season had fewer than the minimum rows and carries the pooled fit.
    pub pooled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalModel {
    /// One entry per season in [`Season::ALL`] order.
    pub seasons: Vec<SeasonFit>,
}

fn fit(records: &[&FlightRecord]) -> Result<LinearModel> {
    let x = Array2::from_shape_fn((records.len(), 2), |(i, j)| {
        if j == 0 {
            records[i].dep_delay.unwrap_or_default()
        } else {
            records[i].distance
        }
    });
    let y: Array1<f64> = records
        .iter()
        .map(|r| r.arr_delay.unwrap_or_default())
        .collect();
    fit_ols(x.view(), y.view(), true, &FEATURES)
}

impl SeasonalModel {
    /// Fits each season on its own records with an intercept. Seasons with
    /// fewer than 10 usable records (or a singular design) get a copy of the
    /// pooled fit and are flagged.
    pub fn train(records: &[FlightRecord]) -> Result<Self> {
        let usable: Vec<&FlightRecord> = records.iter().filter(|r| r.is_usable()).collect();
        if usable.len() < MIN_TRAINING_RECORDS {
            return Err(Error::EmptyDataset(format!(
                "need at least {MIN_TRAINING_RECORDS} usable records, got {}",
                usable.len()
            )));
        }
        let mut parts: [Vec<&FlightRecord>; 4] = Default::default();
        for r in &usable {
            parts[Season::of_month(r.month)?.index()].push(r);
        }
        let mut pooled: Option<LinearModel> = None;
        let mut seasons = Vec::with_capacity(4);
        for season in Season::ALL {
            let rows = &parts[season.index()];
            let own = if rows.len() >= MIN_TRAINING_RECORDS {
                match fit(rows) {
                    Ok(m) => Some(m),
                    Err(Error::SingularDesign { .. }) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            let (model, is_pooled) = match own {
                Some(m) => (m, false),
                None => {
                    if pooled.is_none() {
                        pooled = Some(fit(&usable)?);
                    }
                    (pooled.clone().expect("pooled fit"), true)
                }
            };
            seasons.push(SeasonFit {
                season,
                model,
                count: rows.len(),
                pooled: is_pooled,
            });
        }
        Ok(SeasonalModel { seasons })
    }

    pub fn season_model(&self, season: Season) -> &LinearModel {
        &self.seasons[season.index()].model
    }

    pub fn predict(&self, month: u8, dep_delay: f64, distance: f64) -> Result<f64> {
        let season = Season::of_month(month)?;
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::arg(format!(
                "distance must be positive, got {distance}"
            )));
        }
        predict_linear(self.season_model(season), &[dep_delay, distance])
    }

    pub fn validate(&self) -> Result<()> {
        if self.seasons.len() != 4
            || self
                .seasons
                .iter()
                .zip(Season::ALL)
                .any(|(fit, season)| fit.season != season)
        {
            return Err(Error::InvalidModel(
                "seasonal model needs exactly the four seasons in order".into(),
            ));
        }
        for s in &self.seasons {
            s.model.validate()?;
            if s.model.coefficients.len() != 2 {
                return Err(Error::InvalidModel(
                    "seasonal sub-model must have two features".into(),
                ));
            }
        }
        Ok(())
    }
}
