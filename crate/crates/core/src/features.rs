//! From cleaned flight records to numeric design matrices.
//!
//! Year, quarter and destination world area code are dropped. Categorical
//! columns with at most `cutoff` distinct values are one-hot encoded, the
//! rest get an alphabetical label code starting at 0. Scheduled times become
//! minutes past midnight.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::ingest::FlightRecord;
use crate::{Error, Result, DELAY_THRESHOLD_MINUTES};

/// Categorical input columns, in encoding order.
pub const CATEGORICAL_COLUMNS: [&str; 7] = [
    "MONTH",
    "DAY_OF_MONTH",
    "DAY_OF_WEEK",
    "FLIGHT_NUM",
    "CARRIER",
    "ORIGIN_AIRPORT_ID",
    "DEST_AIRPORT_ID",
];

/// Continuous input columns, in encoding order.
pub const NUMERIC_COLUMNS: [&str; 4] = [
    "CRS_DEP_MINUTES",
    "CRS_ARR_MINUTES",
    "DISTANCE",
    "DEP_DELAY",
];

pub const DROPPED_COLUMNS: [&str; 3] = ["YEAR", "QUARTER", "DEST_WAC"];

pub const DEFAULT_ONE_HOT_CUTOFF: usize = 31;

/// The model inputs kept from a record.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedFeatures {
    pub month: u8,
    pub day_of_month: u8,
    pub day_of_week: u8,
    pub flight_num: String,
    pub carrier: String,
    pub origin_airport_id: i64,
    pub dest_airport_id: i64,
    pub crs_dep_minutes: u32,
    pub crs_arr_minutes: u32,
    pub distance: f64,
    pub dep_delay: Option<f64>,
}

impl SelectedFeatures {
    pub fn categorical(&self, column: &str) -> Option<String> {
        Some(match column {
            "MONTH" => self.month.to_string(),
            "DAY_OF_MONTH" => self.day_of_month.to_string(),
            "DAY_OF_WEEK" => self.day_of_week.to_string(),
            "FLIGHT_NUM" => self.flight_num.clone(),
            "CARRIER" => self.carrier.clone(),
            "ORIGIN_AIRPORT_ID" => self.origin_airport_id.to_string(),
            "DEST_AIRPORT_ID" => self.dest_airport_id.to_string(),
            _ => return None,
        })
    }

    pub fn numeric(&self, column: &str) -> Option<f64> {
        match column {
            "CRS_DEP_MINUTES" => Some(f64::from(self.crs_dep_minutes)),
            "CRS_ARR_MINUTES" => Some(f64::from(self.crs_arr_minutes)),
            "DISTANCE" => Some(self.distance),
            "DEP_DELAY" => self.dep_delay,
            _ => None,
        }
    }
}

pub fn select_features(record: &FlightRecord) -> SelectedFeatures {
    SelectedFeatures {
        month: record.month,
        day_of_month: record.day_of_month,
        day_of_week: record.day_of_week,
        flight_num: record.flight_num.clone(),
        carrier: record.carrier.clone(),
        origin_airport_id: record.origin_airport_id,
        dest_airport_id: record.dest_airport_id,
        crs_dep_minutes: record.crs_dep_time.minutes_since_midnight(),
        crs_arr_minutes: record.crs_arr_time.minutes_since_midnight(),
        distance: record.distance,
        dep_delay: record.dep_delay,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayLabels {
    pub departure: bool,
    pub arrival: bool,
}

/// A flight is delayed when it runs more than 15 minutes late; exactly 15
/// is on time. Cancelled and diverted flights count as arrival-delayed.
pub fn derive_delay_labels(record: &FlightRecord) -> DelayLabels {
    let late = |d: Option<f64>| d.is_some_and(|d| d > DELAY_THRESHOLD_MINUTES);
    let diverted = !record.cancelled && record.arr_delay.is_none();
    DelayLabels {
        departure: late(record.dep_delay) || (record.cancelled && record.dep_delay.is_none()),
        arrival: record.cancelled || diverted || late(record.arr_delay),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ColumnRule {
    /// Category at position `i` of the sorted table encodes as `i`.
    LabelEncode {
        table: Vec<String>,
    },
    OneHot {
        categories: Vec<String>,
    },
    Numeric,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub rule: ColumnRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub version: u32,
    pub one_hot_cutoff: usize,
    /// Unseen categories encode as an all-zero one-hot group or label code
    /// -1 instead of failing.
    pub allow_unknown: bool,
    pub columns: Vec<ColumnSpec>,
}

/// Per output column shift and scale; identity (0, 1) for one-hot columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.sd) {
            *v = (*v - m) / s;
        }
    }
}

#[derive(Debug, Clone)]
pub struct EncodedDataset {
    pub x: Array2<f64>,
    /// Arrival delay, minutes.
    pub y: Array1<f64>,
    pub columns: Vec<String>,
    pub spec: EncoderSpec,
    pub standardization: Option<Standardization>,
}

/// One encoded input row plus the columns whose value was not in the tables.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRow {
    pub values: Vec<f64>,
    pub unknown: Vec<String>,
}

/// Chooses an encoding for every column from the fitting records. The result
/// depends only on the multiset of values.
pub fn fit_encoders(records: &[FlightRecord], cutoff: usize) -> Result<EncoderSpec> {
    if records.is_empty() {
        return Err(Error::EmptyDataset(
            "cannot fit encoders on no records".into(),
        ));
    }
    let selected: Vec<SelectedFeatures> = records.iter().map(select_features).collect();
    let mut columns = Vec::new();
    for name in DROPPED_COLUMNS {
        columns.push(ColumnSpec {
            name: name.to_string(),
            rule: ColumnRule::Drop,
        });
    }
    for name in CATEGORICAL_COLUMNS {
        let distinct: BTreeSet<String> = selected
            .iter()
            .filter_map(|s| s.categorical(name))
            .collect();
        let values: Vec<String> = distinct.into_iter().collect();
        let rule = if values.len() <= cutoff {
            ColumnRule::OneHot { categories: values }
        } else {
            ColumnRule::LabelEncode { table: values }
        };
        columns.push(ColumnSpec {
            name: name.to_string(),
            rule,
        });
    }
    for name in NUMERIC_COLUMNS {
        columns.push(ColumnSpec {
            name: name.to_string(),
            rule: ColumnRule::Numeric,
        });
    }
    Ok(EncoderSpec {
        version: 1,
        one_hot_cutoff: cutoff,
        allow_unknown: true,
        columns,
    })
}

impl EncoderSpec {
    /// Names of the output columns; one-hot columns read `NAME=category`.
    pub fn output_columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        for col in &self.columns {
            match &col.rule {
                ColumnRule::OneHot { categories } => {
                    out.extend(categories.iter().map(|c| format!("{}={c}", col.name)));
                }
                ColumnRule::LabelEncode { .. } | ColumnRule::Numeric => out.push(col.name.clone()),
                ColumnRule::Drop => {}
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match &c.rule {
                ColumnRule::OneHot { categories } => categories.len(),
                ColumnRule::LabelEncode { .. } | ColumnRule::Numeric => 1,
                ColumnRule::Drop => 0,
            })
            .sum()
    }

    /// Output positions that are never standardized.
    fn one_hot_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.width());
        for col in &self.columns {
            match &col.rule {
                ColumnRule::OneHot { categories } => mask.extend(categories.iter().map(|_| true)),
                ColumnRule::LabelEncode { .. } | ColumnRule::Numeric => mask.push(false),
                ColumnRule::Drop => {}
            }
        }
        mask
    }

    /// Encodes one row without standardization. Unknown label codes come out
    /// as -1 and are listed in `unknown`.
    pub fn encode_raw(&self, features: &SelectedFeatures) -> Result<EncodedRow> {
        let mut values = Vec::with_capacity(self.width());
        let mut unknown = Vec::new();
        for col in &self.columns {
            match &col.rule {
                ColumnRule::Drop => {}
                ColumnRule::Numeric => {
                    let v = features.numeric(&col.name).ok_or_else(|| {
                        Error::arg(format!("numeric column {} has no value", col.name))
                    })?;
                    values.push(v);
                }
                ColumnRule::OneHot { categories } => {
                    let value = self.category(features, &col.name)?;
                    let hit = categories.binary_search(&value).ok();
                    if hit.is_none() {
                        self.unknown(&col.name, &value)?;
                        unknown.push(col.name.clone());
                    }
                    values.extend((0..categories.len()).map(|i| {
                        if Some(i) == hit {
                            1.0
                        } else {
                            0.0
                        }
                    }));
                }
                ColumnRule::LabelEncode { table } => {
                    let value = self.category(features, &col.name)?;
                    match table.binary_search(&value) {
                        Ok(code) => values.push(code as f64),
                        Err(_) => {
                            self.unknown(&col.name, &value)?;
                            unknown.push(col.name.clone());
                            values.push(-1.0);
                        }
                    }
                }
            }
        }
        Ok(EncodedRow { values, unknown })
    }

    /// Encodes one row and applies `standardization`. Unknown label codes are
    /// placed at the column mean, i.e. 0 after standardization.
    pub fn encode_row(
        &self,
        features: &SelectedFeatures,
        standardization: Option<&Standardization>,
    ) -> Result<EncodedRow> {
        let mut row = self.encode_raw(features)?;
        if let Some(st) = standardization {
            if st.mean.len() != row.values.len() || st.sd.len() != row.values.len() {
                return Err(Error::arg("standardization width does not match encoder"));
            }
            let unknown_positions = self.unknown_label_positions(&row.unknown);
            st.apply(&mut row.values);
            for p in unknown_positions {
                row.values[p] = 0.0;
            }
        }
        Ok(row)
    }

    fn unknown_label_positions(&self, unknown: &[String]) -> Vec<usize> {
        let mut positions = Vec::new();
        let mut offset = 0;
        for col in &self.columns {
            match &col.rule {
                ColumnRule::OneHot { categories } => offset += categories.len(),
                ColumnRule::LabelEncode { .. } => {
                    if unknown.contains(&col.name) {
                        positions.push(offset);
                    }
                    offset += 1;
                }
                ColumnRule::Numeric => offset += 1,
                ColumnRule::Drop => {}
            }
        }
        positions
    }

    fn category(&self, features: &SelectedFeatures, column: &str) -> Result<String> {
        features
            .categorical(column)
            .ok_or_else(|| Error::arg(format!("{column} is not a categorical column")))
    }

    fn unknown(&self, column: &str, value: &str) -> Result<()> {
        if self.allow_unknown {
            Ok(())
        } else {
            Err(Error::UnknownCategory {
                column: column.to_string(),
                value: value.to_string(),
            })
        }
    }

    /// Reads the category back out of a one-hot group of an encoded row.
    pub fn decode_one_hot<'a>(&'a self, row: &[f64], column: &str) -> Option<&'a str> {
        let mut offset = 0;
        for col in &self.columns {
            match &col.rule {
                ColumnRule::OneHot { categories } => {
                    if col.name == column {
                        let group = &row[offset..offset + categories.len()];
                        return group
                            .iter()
                            .position(|&v| v == 1.0)
                            .map(|i| categories[i].as_str());
                    }
                    offset += categories.len();
                }
                ColumnRule::LabelEncode { .. } | ColumnRule::Numeric => offset += 1,
                ColumnRule::Drop => {}
            }
        }
        None
    }

    pub fn rule(&self, column: &str) -> Option<&ColumnRule> {
        self.columns
            .iter()
            .find(|c| c.name == column)
            .map(|c| &c.rule)
    }

    /// Structural checks applied when a spec is loaded from disk.
    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for col in &self.columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate encoder column {}",
                    col.name
                )));
            }
            if let ColumnRule::OneHot { categories: v } | ColumnRule::LabelEncode { table: v } =
                &col.rule
            {
                if v.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidModel(format!(
                        "categories of {} are not sorted and unique",
                        col.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Encodes records with `spec`. With `standardize`, non one-hot columns are
/// shifted and scaled to mean 0 and population standard deviation 1 on these
/// records; constant columns become all zeros.
pub fn encode(
    records: &[FlightRecord],
    spec: &EncoderSpec,
    standardize: bool,
) -> Result<EncodedDataset> {
    let (x, y, unknown) = encode_matrix(records, spec)?;
    let mut dataset = EncodedDataset {
        x,
        y,
        columns: spec.output_columns(),
        spec: spec.clone(),
        standardization: None,
    };
    if standardize {
        let st = fit_standardization(&dataset.x, &spec.one_hot_mask());
        apply_standardization(&mut dataset.x, &st, spec, &unknown);
        dataset.standardization = Some(st);
    }
    Ok(dataset)
}

/// Encodes records with previously fitted parameters, e.g. a test split.
pub fn encode_with(
    records: &[FlightRecord],
    spec: &EncoderSpec,
    standardization: Option<&Standardization>,
) -> Result<EncodedDataset> {
    let (mut x, y, unknown) = encode_matrix(records, spec)?;
    if let Some(st) = standardization {
        if st.mean.len() != x.ncols() {
            return Err(Error::arg("standardization width does not match encoder"));
        }
        apply_standardization(&mut x, st, spec, &unknown);
    }
    Ok(EncodedDataset {
        x,
        y,
        columns: spec.output_columns(),
        spec: spec.clone(),
        standardization: standardization.cloned(),
    })
}

type UnknownCells = BTreeMap<usize, Vec<String>>;

fn encode_matrix(
    records: &[FlightRecord],
    spec: &EncoderSpec,
) -> Result<(Array2<f64>, Array1<f64>, UnknownCells)> {
    let width = spec.width();
    let mut x = Array2::zeros((records.len(), width));
    let mut y = Array1::zeros(records.len());
    let mut unknown = BTreeMap::new();
    for (i, record) in records.iter().enumerate() {
        let target = match (record.cancelled, record.dep_delay, record.arr_delay) {
            (false, Some(_), Some(arr)) => arr,
            _ => {
                return Err(Error::arg(format!(
                    "record {i} is cancelled or lacks a measured delay"
                )))
            }
        };
        let row = spec.encode_raw(&select_features(record))?;
        for (j, v) in row.values.into_iter().enumerate() {
            x[[i, j]] = v;
        }
        y[i] = target;
        if !row.unknown.is_empty() {
            unknown.insert(i, row.unknown);
        }
    }
    Ok((x, y, unknown))
}

fn fit_standardization(x: &Array2<f64>, one_hot: &[bool]) -> Standardization {
    let n = x.nrows() as f64;
    let mut mean = vec![0.0; x.ncols()];
    let mut sd = vec![1.0; x.ncols()];
    for (j, column) in x.columns().into_iter().enumerate() {
        if one_hot[j] || x.nrows() == 0 {
            continue;
        }
        let m = column.sum() / n;
        let var = column.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean[j] = m;
        sd[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    Standardization { mean, sd }
}

fn apply_standardization(
    x: &mut Array2<f64>,
    st: &Standardization,
    spec: &EncoderSpec,
    unknown: &UnknownCells,
) {
    for mut row in x.rows_mut() {
        for ((v, m), s) in row.iter_mut().zip(&st.mean).zip(&st.sd) {
            *v = (*v - m) / s;
        }
    }
    for (&i, columns) in unknown {
        for p in spec.unknown_label_positions(columns) {
            x[[i, p]] = 0.0;
        }
    }
}
