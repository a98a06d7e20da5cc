//! One entry point over the three trained models.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::carrier_origin::{
    resolve_departure_delay, CarrierOriginModel, CarrierOriginQuery, DelaySource, ImputationIndex,
    ImputationKey, ModelRoute,
};
use crate::features::{EncoderSpec, SelectedFeatures, Standardization};
use crate::ingest::{ClockTime, FlightRecord};
use crate::mlp::MlpModel;
use crate::seasonal::{Season, SeasonalModel};
use crate::{Error, Result, DELAY_THRESHOLD_MINUTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    CarrierOrigin,
    Seasonal,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::CarrierOrigin,
        ModelKind::Seasonal,
        ModelKind::Mlp,
    ];

    /// Wire and file name.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::CarrierOrigin => "carrier_origin",
            ModelKind::Seasonal => "seasonal",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Row label in the evaluation table.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::CarrierOrigin => "Model 1 – Carrier Origin",
            ModelKind::Seasonal => "Model 2 – Seasonal",
            ModelKind::Mlp => "Model 3 – Neural Net",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    /// Accepts both `carrier_origin` and `carrier-origin`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "carrier_origin" => Ok(ModelKind::CarrierOrigin),
            "seasonal" => Ok(ModelKind::Seasonal),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(Error::NotFound(format!("model {s:?}"))),
        }
    }
}

/// The network together with the encoder it was trained behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpPredictor {
    pub network: MlpModel,
    pub encoders: EncoderSpec,
    pub standardization: Standardization,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    CarrierOrigin(CarrierOriginModel),
    Seasonal(SeasonalModel),
    Mlp(MlpPredictor),
}

/// Everything known about a flight at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightQuery {
    pub carrier: String,
    pub origin_airport_id: i64,
    pub dest_airport_id: i64,
    pub date: NaiveDate,
    pub crs_dep_time: ClockTime,
    /// Estimated from the distance when absent.
    pub crs_arr_time: Option<ClockTime>,
    pub flight_num: Option<String>,
    pub distance: f64,
    pub dep_delay: Option<f64>,
}

impl FlightQuery {
    /// The query a historical record would have produced, with its measured
    /// departure delay.
    pub fn from_record(record: &FlightRecord) -> Result<Self> {
        let date =
            NaiveDate::from_ymd_opt(record.year, record.month.into(), record.day_of_month.into())
                .ok_or_else(|| {
                Error::arg(format!(
                    "invalid date {}-{}-{}",
                    record.year, record.month, record.day_of_month
                ))
            })?;
        Ok(FlightQuery {
            carrier: record.carrier.clone(),
            origin_airport_id: record.origin_airport_id,
            dest_airport_id: record.dest_airport_id,
            date,
            crs_dep_time: record.crs_dep_time,
            crs_arr_time: Some(record.crs_arr_time),
            flight_num: Some(record.flight_num.clone()),
            distance: record.distance,
            dep_delay: record.dep_delay,
        })
    }

    pub fn month(&self) -> u8 {
        self.date.month() as u8
    }

    fn imputation_key(&self) -> ImputationKey {
        ImputationKey {
            origin_airport_id: self.origin_airport_id,
            carrier: self.carrier.clone(),
            month: self.month(),
            hour_bucket: ImputationKey::bucket(self.crs_dep_time),
        }
    }
}

/// Scheduled block time guess: 480 mph cruise plus half an hour.
pub fn estimated_block_minutes(distance: f64) -> u32 {
    (distance / 8.0).round().max(0.0) as u32 + 30
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub delay_source: Option<DelaySource>,
    pub route: Option<ModelRoute>,
    pub season: Option<Season>,
    /// The season's model is the pooled fit.
    pub pooled_season: bool,
    /// Categorical inputs the encoder had not seen.
    pub unknown_categories: Vec<String>,
    pub estimated_arrival_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub model: ModelKind,
    pub minutes: f64,
    pub delayed: bool,
    pub provenance: Provenance,
}

impl Prediction {
    fn new(model: ModelKind, minutes: f64, provenance: Provenance) -> Result<Self> {
        if !minutes.is_finite() {
            return Err(Error::InvalidModel(format!(
                "{model} produced a non-finite prediction"
            )));
        }
        Ok(Prediction {
            model,
            minutes,
            delayed: minutes > DELAY_THRESHOLD_MINUTES,
            provenance,
        })
    }
}

impl Predictor {
    pub fn kind(&self) -> ModelKind {
        match self {
            Predictor::CarrierOrigin(_) => ModelKind::CarrierOrigin,
            Predictor::Seasonal(_) => ModelKind::Seasonal,
            Predictor::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Predictor::CarrierOrigin(m) => m.validate(),
            Predictor::Seasonal(m) => m.validate(),
            Predictor::Mlp(p) => {
                p.network.validate()?;
                p.encoders.validate()?;
                let width = p.encoders.width();
                if p.network.input_width() != width
                    || p.standardization.mean.len() != width
                    || p.standardization.sd.len() != width
                {
                    return Err(Error::InvalidModel(
                        "network, encoder and standardization widths differ".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Number of regressors used for adjusted R².
    pub fn regressor_count(&self) -> usize {
        match self {
            Predictor::CarrierOrigin(_) => 2,
            Predictor::Seasonal(_) => 3,
            Predictor::Mlp(p) => p.network.input_width(),
        }
    }

    /// Predicts arrival delay in minutes. A missing departure delay is
    /// imputed from `index` when possible and assumed zero otherwise.
    pub fn predict(
        &self,
        query: &FlightQuery,
        index: Option<&ImputationIndex>,
    ) -> Result<Prediction> {
        if !(query.distance > 0.0 && query.distance.is_finite()) {
            return Err(Error::arg(format!(
                "distance must be positive, got {}",
                query.distance
            )));
        }
        match self {
            Predictor::CarrierOrigin(model) => {
                let p = model.predict(
                    &CarrierOriginQuery {
                        carrier: &query.carrier,
                        origin_airport_id: Some(query.origin_airport_id),
                        month: query.month(),
                        crs_dep_time: query.crs_dep_time,
                        dep_delay: query.dep_delay,
                        distance: query.distance,
                    },
                    index,
                )?;
                let provenance = Provenance {
                    delay_source: Some(p.delay_source),
                    route: Some(p.route),
                    ..Provenance::default()
                };
                Prediction::new(ModelKind::CarrierOrigin, p.minutes, provenance)
            }
            Predictor::Seasonal(model) => {
                let (dep, source) =
                    resolve_departure_delay(query.dep_delay, index, Some(&query.imputation_key()));
                let season = Season::of_month(query.month())?;
                let minutes = model.predict(query.month(), dep, query.distance)?;
                let provenance = Provenance {
                    delay_source: Some(source),
                    season: Some(season),
                    pooled_season: model.seasons[season.index()].pooled,
                    ..Provenance::default()
                };
                Prediction::new(ModelKind::Seasonal, minutes, provenance)
            }
            Predictor::Mlp(p) => {
                let (dep, source) =
                    resolve_departure_delay(query.dep_delay, index, Some(&query.imputation_key()));
                let dep_minutes = query.crs_dep_time.minutes_since_midnight();
                let (arr, estimated) = match query.crs_arr_time {
                    Some(t) => (t, false),
                    None => (
                        ClockTime::from_minutes(
                            dep_minutes + estimated_block_minutes(query.distance),
                        ),
                        true,
                    ),
                };
                let features = SelectedFeatures {
                    month: query.month(),
                    day_of_month: query.date.day() as u8,
                    day_of_week: query.date.weekday().number_from_monday() as u8,
                    flight_num: query.flight_num.clone().unwrap_or_default(),
                    carrier: query.carrier.clone(),
                    origin_airport_id: query.origin_airport_id,
                    dest_airport_id: query.dest_airport_id,
                    crs_dep_minutes: dep_minutes,
                    crs_arr_minutes: arr.minutes_since_midnight(),
                    distance: query.distance,
                    dep_delay: Some(dep),
                };
                let row = p.encoders.encode_row(&features, Some(&p.standardization))?;
                let minutes = p.network.forward(&row.values)?;
                let provenance = Provenance {
                    delay_source: Some(source),
                    unknown_categories: row.unknown,
                    estimated_arrival_time: estimated,
                    ..Provenance::default()
                };
                Prediction::new(ModelKind::Mlp, minutes, provenance)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteEntry {
    pub origin_airport_id: i64,
    pub dest_airport_id: i64,
    pub mean_distance: f64,
    /// Mean scheduled block time in minutes, across midnight where needed.
    pub mean_block_minutes: f64,
    pub count: usize,
}

/// Mean observed distance and block time per origin/destination pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RouteTable {
    pub routes: Vec<RouteEntry>,
}

impl RouteTable {
    pub fn build(records: &[FlightRecord]) -> Self {
        let mut acc: BTreeMap<(i64, i64), (f64, f64, usize)> = BTreeMap::new();
        for r in records {
            let block = (r.crs_arr_time.minutes_since_midnight() + 1440
                - r.crs_dep_time.minutes_since_midnight())
                % 1440;
            let e = acc
                .entry((r.origin_airport_id, r.dest_airport_id))
                .or_default();
            e.0 += r.distance;
            e.1 += block as f64;
            e.2 += 1;
        }
        RouteTable {
            routes: acc
                .into_iter()
                .map(|((o, d), (dist, block, n))| RouteEntry {
                    origin_airport_id: o,
                    dest_airport_id: d,
                    mean_distance: dist / n as f64,
                    mean_block_minutes: block / n as f64,
                    count: n,
                })
                .collect(),
        }
    }

    pub fn get(&self, origin: i64, dest: i64) -> Option<&RouteEntry> {
        self.routes
            .binary_search_by(|e| (e.origin_airport_id, e.dest_airport_id).cmp(&(origin, dest)))
            .ok()
            .map(|i| &self.routes[i])
    }

    pub fn distance(&self, origin: i64, dest: i64) -> Option<f64> {
        self.get(origin, dest).map(|e| e.mean_distance)
    }

    pub fn arrival_time(&self, origin: i64, dest: i64, departure: ClockTime) -> Option<ClockTime> {
        self.get(origin, dest).map(|e| {
            ClockTime::from_minutes(
                departure.minutes_since_midnight() + e.mean_block_minutes.round() as u32,
            )
        })
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}
