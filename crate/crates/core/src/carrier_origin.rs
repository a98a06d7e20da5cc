//! Carrier/origin model: per (carrier, origin airport) regression of arrival
//! delay on departure delay and distance, plus a historical-average index
//! that stands in for an unknown departure delay.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::ingest::{ClockTime, FlightRecord};
use crate::numerics::{fit_ols, predict_linear, LinearModel};
use crate::{Error, Result};

pub const FEATURES: [&str; 2] = ["DEP_DELAY", "DISTANCE"];

/// Models refuse to train on fewer usable records than this.
pub const MIN_TRAINING_RECORDS: usize = 10;

/// Width of the scheduled-departure bucket in the imputation key, hours.
pub const HOUR_BUCKET_SIZE: u32 = 3;

pub const DEFAULT_SUPPORT_THRESHOLD: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarrierOriginConfig {
    pub min_group_size: usize,
    pub with_intercept: bool,
}

impl Default for CarrierOriginConfig {
    fn default() -> Self {
        CarrierOriginConfig {
            min_group_size: 30,
            with_intercept: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub carrier: String,
    pub origin_airport_id: i64,
    pub model: LinearModel,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierOriginModel {
    /// Sorted by (carrier, origin).
    pub groups: Vec<GroupFit>,
    pub fallback: LinearModel,
    pub fallback_count: usize,
    pub config: CarrierOriginConfig,
}

/// Where the departure delay fed to a model came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelaySource {
    MeasuredDelay,
    ImputedDelay,
    NoDelayAssumed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelRoute {
    Group,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarrierOriginQuery<'a> {
    pub carrier: &'a str,
    pub origin_airport_id: Option<i64>,
    pub month: u8,
    pub crs_dep_time: ClockTime,
    pub dep_delay: Option<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierOriginPrediction {
    pub minutes: f64,
    pub delay_source: DelaySource,
    pub route: ModelRoute,
}

fn design(records: &[&FlightRecord]) -> (Array2<f64>, Array1<f64>) {
    let x = Array2::from_shape_fn((records.len(), 2), |(i, j)| {
        if j == 0 {
            records[i].dep_delay.unwrap_or_default()
        } else {
            records[i].distance
        }
    });
    let y = records
        .iter()
        .map(|r| r.arr_delay.unwrap_or_default())
        .collect();
    (x, y)
}

impl CarrierOriginModel {
    /// Fits one regression per (carrier, origin) group with at least
    /// `min_group_size` usable records, and a fallback on all of them.
    /// A group whose design is singular is left to the fallback.
    pub fn train(records: &[FlightRecord], config: CarrierOriginConfig) -> Result<Self> {
        let usable: Vec<&FlightRecord> = records.iter().filter(|r| r.is_usable()).collect();
        if usable.len() < MIN_TRAINING_RECORDS {
            return Err(Error::EmptyDataset(format!(
                "need at least {MIN_TRAINING_RECORDS} usable records, got {}",
                usable.len()
            )));
        }
        let (x, y) = design(&usable);
        let fallback = fit_ols(x.view(), y.view(), config.with_intercept, &FEATURES)?;

        let mut by_group: BTreeMap<(&str, i64), Vec<&FlightRecord>> = BTreeMap::new();
        for r in &usable {
            by_group
                .entry((r.carrier.as_str(), r.origin_airport_id))
                .or_default()
                .push(r);
        }
        let mut groups = Vec::new();
        for ((carrier, origin), rows) in by_group {
            if rows.len() < config.min_group_size.max(1) {
                continue;
            }
            let (x, y) = design(&rows);
            match fit_ols(x.view(), y.view(), config.with_intercept, &FEATURES) {
                Ok(model) => groups.push(GroupFit {
                    carrier: carrier.to_string(),
                    origin_airport_id: origin,
                    model,
                    count: rows.len(),
                }),
                Err(Error::SingularDesign { .. } | Error::InsufficientData { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(CarrierOriginModel {
            groups,
            fallback,
            fallback_count: usable.len(),
            config,
        })
    }

    pub fn group(&self, carrier: &str, origin_airport_id: i64) -> Option<&GroupFit> {
        self.groups
            .binary_search_by(|g| {
                (g.carrier.as_str(), g.origin_airport_id).cmp(&(carrier, origin_airport_id))
            })
            .ok()
            .map(|i| &self.groups[i])
    }

    /// Resolves the departure delay (measured, imputed or assumed zero), then
    /// applies the group model when one exists and the fallback otherwise.
    pub fn predict(
        &self,
        query: &CarrierOriginQuery<'_>,
        index: Option<&ImputationIndex>,
    ) -> Result<CarrierOriginPrediction> {
        if !(query.distance > 0.0 && query.distance.is_finite()) {
            return Err(Error::arg(format!(
                "distance must be positive, got {}",
                query.distance
            )));
        }
        let key = query.origin_airport_id.map(|origin| ImputationKey {
            origin_airport_id: origin,
            carrier: query.carrier.to_string(),
            month: query.month,
            hour_bucket: ImputationKey::bucket(query.crs_dep_time),
        });
        let (dep, delay_source) = resolve_departure_delay(query.dep_delay, index, key.as_ref());
        let (model, route) = match query
            .origin_airport_id
            .and_then(|origin| self.group(query.carrier, origin))
        {
            Some(g) => (&g.model, ModelRoute::Group),
            None => (&self.fallback, ModelRoute::Fallback),
        };
        Ok(CarrierOriginPrediction {
            minutes: predict_linear(model, &[dep, query.distance])?,
            delay_source,
            route,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.fallback.validate()?;
        for pair in self.groups.windows(2) {
            if (pair[0].carrier.as_str(), pair[0].origin_airport_id)
                >= (pair[1].carrier.as_str(), pair[1].origin_airport_id)
            {
                return Err(Error::InvalidModel(
                    "carrier/origin groups not sorted and unique".into(),
                ));
            }
        }
        for g in &self.groups {
            g.model.validate()?;
            if g.count < self.config.min_group_size {
                return Err(Error::InvalidModel(format!(
                    "group ({}, {}) trained on {} rows, below the minimum {}",
                    g.carrier, g.origin_airport_id, g.count, self.config.min_group_size
                )));
            }
        }
        Ok(())
    }
}

/// The departure delay to use: measured when given, else the imputed
/// historical mean, else zero (on-schedule departure).
pub fn resolve_departure_delay(
    measured: Option<f64>,
    index: Option<&ImputationIndex>,
    key: Option<&ImputationKey>,
) -> (f64, DelaySource) {
    if let Some(d) = measured {
        return (d, DelaySource::MeasuredDelay);
    }
    match (index, key) {
        (Some(index), Some(key)) => match index.impute(key) {
            Some(mean) => (mean, DelaySource::ImputedDelay),
            None => (0.0, DelaySource::NoDelayAssumed),
        },
        _ => (0.0, DelaySource::NoDelayAssumed),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ImputationKey {
    pub origin_airport_id: i64,
    pub carrier: String,
    pub month: u8,
    /// Scheduled departure hour divided by [`HOUR_BUCKET_SIZE`].
    pub hour_bucket: u8,
}

impl ImputationKey {
    pub fn bucket(time: ClockTime) -> u8 {
        (time.hour() / HOUR_BUCKET_SIZE) as u8
    }

    pub fn of(record: &FlightRecord) -> Self {
        ImputationKey {
            origin_airport_id: record.origin_airport_id,
            carrier: record.carrier.clone(),
            month: record.month,
            hour_bucket: Self::bucket(record.crs_dep_time),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationEntry {
    pub key: ImputationKey,
    pub mean_dep_delay: f64,
    pub support: usize,
}

/// Historical mean departure delay per (origin, carrier, month, hour bucket).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationIndex {
    /// Sorted by key.
    pub entries: Vec<ImputationEntry>,
    pub support_threshold: usize,
}

impl ImputationIndex {
    pub fn build(records: &[FlightRecord], support_threshold: usize) -> Self {
        let mut sums: BTreeMap<ImputationKey, (f64, usize)> = BTreeMap::new();
        for r in records {
            if let Some(d) = r.dep_delay {
                let e = sums.entry(ImputationKey::of(r)).or_insert((0.0, 0));
                e.0 += d;
                e.1 += 1;
            }
        }
        ImputationIndex {
            entries: sums
                .into_iter()
                .map(|(key, (sum, count))| ImputationEntry {
                    key,
                    mean_dep_delay: sum / count as f64,
                    support: count,
                })
                .collect(),
            support_threshold,
        }
    }

    pub fn entry(&self, key: &ImputationKey) -> Option<&ImputationEntry> {
        self.entries
            .binary_search_by(|e| e.key.cmp(key))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// The stored mean when its support reaches the threshold.
    pub fn impute(&self, key: &ImputationKey) -> Option<f64> {
        self.entry(key)
            .filter(|e| e.support >= self.support_threshold)
            .map(|e| e.mean_dep_delay)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.windows(2).any(|w| w[0].key >= w[1].key) {
            return Err(Error::InvalidModel(
                "imputation keys not sorted and unique".into(),
            ));
        }
        if self
            .entries
            .iter()
            .any(|e| e.support == 0 || !e.mean_dep_delay.is_finite())
        {
            return Err(Error::InvalidModel(
                "imputation entry with no support or non-finite mean".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SyntheticConfig};

    fn one_group(n: usize) -> Vec<FlightRecord> {
        let config = SyntheticConfig {
            carriers: 1,
            airports: 2,
            ..SyntheticConfig::linear(4 * n, 0.9, 0.01)
        };
        let records = generate_synthetic(&config, 3).unwrap();
        // Two airports: keep the flights leaving the first one. Distance is then
        // constant, which the intercept-free fit still separates from delay.
        let origin = records[0].origin_airport_id;
        records
            .into_iter()
            .filter(|r| r.origin_airport_id == origin)
            .take(n)
            .collect()
    }

    #[test]
    fn recovers_noiseless_group_coefficients() {
        let records = one_group(200);
        let model = CarrierOriginModel::train(&records, CarrierOriginConfig::default()).unwrap();
        assert_eq!(model.groups.len(), 1);
        let g = &model.groups[0].model;
        assert!((g.coefficients[0] - 0.9).abs() < 1e-6);
        assert!((g.coefficients[1] - 0.01).abs() < 1e-6);
        for r in &records {
            let q = CarrierOriginQuery {
                carrier: &r.carrier,
                origin_airport_id: Some(r.origin_airport_id),
                month: r.month,
                crs_dep_time: r.crs_dep_time,
                dep_delay: r.dep_delay,
                distance: r.distance,
            };
            let p = model.predict(&q, None).unwrap();
            assert!((p.minutes - r.arr_delay.unwrap()).abs() <= 1e-6);
            assert_eq!(p.route, ModelRoute::Group);
        }
    }

    #[test]
    fn small_groups_use_fallback_only() {
        let mut records = generate_synthetic(&SyntheticConfig::linear(200, 0.9, 0.01), 1).unwrap();
        records.truncate(6);
        for (i, r) in records.iter_mut().enumerate() {
            r.carrier = if i < 3 { "AA".into() } else { "DL".into() };
            r.origin_airport_id = 10397;
        }
        // pad to the minimum training size with a third carrier
        let mut extra = generate_synthetic(&SyntheticConfig::linear(200, 0.9, 0.01), 2).unwrap();
        extra.truncate(4);
        for r in &mut extra {
            r.carrier = "UA".into();
        }
        records.extend(extra);
        let config = CarrierOriginConfig {
            min_group_size: 5,
            ..Default::default()
        };
        let model = CarrierOriginModel::train(&records, config).unwrap();
        assert!(model.groups.is_empty());
        assert_eq!(model.fallback_count, 10);
    }

    #[test]
    fn too_few_records() {
        let records = generate_synthetic(&SyntheticConfig::linear(9, 0.9, 0.01), 1).unwrap();
        assert!(matches!(
            CarrierOriginModel::train(&records, CarrierOriginConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let records = generate_synthetic(&SyntheticConfig::with_count(3000), 8).unwrap();
        let a = CarrierOriginModel::train(&records, CarrierOriginConfig::default()).unwrap();
        let b = CarrierOriginModel::train(&records, CarrierOriginConfig::default()).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert!(a.groups.iter().all(|g| g.count >= 30));
    }

    fn entry_record(delay: f64) -> FlightRecord {
        let mut r = generate_synthetic(&SyntheticConfig::with_count(1), 1)
            .unwrap()
            .remove(0);
        r.cancelled = false;
        r.dep_delay = Some(delay);
        r.arr_delay = Some(delay);
        r.origin_airport_id = 10397;
        r.carrier = "DL".into();
        r.month = 7;
        r.crs_dep_time = ClockTime::new(1330).unwrap();
        r
    }

    #[test]
    fn index_means_and_threshold() {
        let records: Vec<FlightRecord> = [10.0, 20.0, 30.0]
            .iter()
            .map(|&d| entry_record(d))
            .collect();
        let index = ImputationIndex::build(&records, 3);
        let key = ImputationKey::of(&records[0]);
        assert_eq!(key.hour_bucket, 4);
        let e = index.entry(&key).unwrap();
        assert_eq!((e.mean_dep_delay, e.support), (20.0, 3));
        assert_eq!(index.impute(&key), Some(20.0));

        let index = ImputationIndex::build(&records[..2], 3);
        assert_eq!(index.impute(&key), None);

        let other = ImputationKey { month: 8, ..key };
        assert_eq!(index.impute(&other), None);
        assert!(ImputationIndex::build(&[], 5).is_empty());
    }

    #[test]
    fn index_matches_brute_force_group_by() {
        let records = generate_synthetic(&SyntheticConfig::with_count(4000), 12).unwrap();
        let index = ImputationIndex::build(&records, 1);
        index.validate().unwrap();
        for e in index.entries.iter().step_by(7) {
            let matching: Vec<f64> = records
                .iter()
                .filter(|r| {
                    r.origin_airport_id == e.key.origin_airport_id
                        && r.carrier == e.key.carrier
                        && r.month == e.key.month
                        && r.crs_dep_time.hour() / 3 == u32::from(e.key.hour_bucket)
                })
                .filter_map(|r| r.dep_delay)
                .collect();
            assert_eq!(matching.len(), e.support);
            let mean = matching.iter().sum::<f64>() / matching.len() as f64;
            assert!((mean - e.mean_dep_delay).abs() < 1e-9);
        }
        let with_delay = records.iter().filter(|r| r.dep_delay.is_some()).count();
        assert_eq!(
            index.entries.iter().map(|e| e.support).sum::<usize>(),
            with_delay
        );
    }

    fn fixed_model() -> CarrierOriginModel {
        let lm = |a: f64, b: f64| {
            LinearModel::new(
                vec![a, b],
                None,
                FEATURES.iter().map(|s| s.to_string()).collect(),
            )
            .unwrap()
        };
        CarrierOriginModel {
            groups: vec![GroupFit {
                carrier: "DL".into(),
                origin_airport_id: 10397,
                model: lm(0.9, 0.01),
                count: 40,
            }],
            fallback: lm(1.0, 0.0),
            fallback_count: 100,
            config: CarrierOriginConfig::default(),
        }
    }

    fn query(dep_delay: Option<f64>) -> CarrierOriginQuery<'static> {
        CarrierOriginQuery {
            carrier: "DL",
            origin_airport_id: Some(10397),
            month: 7,
            crs_dep_time: ClockTime::new(1330).unwrap(),
            dep_delay,
            distance: 500.0,
        }
    }

    #[test]
    fn predict_measured_group() {
        let p = fixed_model().predict(&query(Some(30.0)), None).unwrap();
        assert!((p.minutes - 32.0).abs() < 1e-12);
        assert_eq!(p.delay_source, DelaySource::MeasuredDelay);
        assert_eq!(p.route, ModelRoute::Group);
    }

    #[test]
    fn predict_imputed_and_assumed() {
        let records: Vec<FlightRecord> = [10.0, 20.0, 30.0]
            .iter()
            .map(|&d| entry_record(d))
            .collect();
        let index = ImputationIndex::build(&records, 3);
        let p = fixed_model().predict(&query(None), Some(&index)).unwrap();
        assert_eq!(p.delay_source, DelaySource::ImputedDelay);
        assert!((p.minutes - (0.9 * 20.0 + 5.0)).abs() < 1e-12);

        let p = fixed_model().predict(&query(None), None).unwrap();
        assert_eq!(p.delay_source, DelaySource::NoDelayAssumed);
        assert!((p.minutes - 5.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_uses_fallback() {
        let mut q = query(Some(30.0));
        q.carrier = "ZZ";
        let p = fixed_model().predict(&q, None).unwrap();
        assert_eq!(p.route, ModelRoute::Fallback);
        assert_eq!(p.minutes, 30.0);
        q.origin_airport_id = None;
        assert_eq!(
            fixed_model().predict(&q, None).unwrap().route,
            ModelRoute::Fallback
        );
    }

    #[test]
    fn prediction_is_linear_in_departure_delay() {
        let m = fixed_model();
        for (d1, d2) in [(0.0, 10.0), (-7.5, 120.0), (33.3, 33.4)] {
            let p1 = m.predict(&query(Some(d1)), None).unwrap().minutes;
            let p2 = m.predict(&query(Some(d2)), None).unwrap().minutes;
            assert!(((p1 - p2) - 0.9 * (d1 - d2)).abs() < 1e-12);
        }
    }

    #[test]
    fn non_positive_distance_is_rejected() {
        let mut q = query(Some(1.0));
        q.distance = 0.0;
        assert!(fixed_model().predict(&q, None).is_err());
    }
}
