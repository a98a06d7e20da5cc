use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hourly station readings; `None` marks a missing observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    station: String,
    points: Vec<(i64, Option<f64>)>,
}

impl HourlySeries {
    pub fn new(station: impl Into<String>, points: Vec<(i64, Option<f64>)>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::arg("hour indices must be strictly increasing"));
        }
        Ok(HourlySeries {
            station: station.into(),
            points,
        })
    }

    pub fn station(&self) -> &str {
        &self.station
    }

    pub fn points(&self) -> &[(i64, Option<f64>)] {
        &self.points
    }

    pub fn value_at(&self, hour: i64) -> Option<f64> {
        self.points
            .iter()
            .find(|(h, _)| *h == hour)
            .and_then(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub series: HourlySeries,
    /// Hours whose value was filled in.
    pub filled: Vec<i64>,
    /// Leading or trailing hours left missing: no known neighbour on one side.
    pub unfilled_edges: Vec<i64>,
}

/// Fills every gap that has a known value on both sides with the straight
/// line through its nearest known neighbours.
pub fn interpolate_hourly(series: &HourlySeries) -> Result<Interpolated> {
    let known: Vec<usize> = series
        .points
        .iter()
        .enumerate()
        .filter(|(_, (_, v))| v.is_some())
        .map(|(i, _)| i)
        .collect();
    if known.len() < 2 {
        return Err(Error::InsufficientData {
            what: "known values",
            needed: 2,
            got: known.len(),
        });
    }

    let mut points = series.points.clone();
    let mut filled = Vec::new();
    for pair in known.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let (h0, v0) = (points[lo].0, points[lo].1.unwrap());
        let (h1, v1) = (points[hi].0, points[hi].1.unwrap());
        let span = (h1 - h0) as f64;
        for point in &mut points[lo + 1..hi] {
            let t = (point.0 - h0) as f64 / span;
            point.1 = Some(v0 + (v1 - v0) * t);
            filled.push(point.0);
        }
    }
    let first = known[0];
    let last = *known.last().unwrap();
    let unfilled_edges = points[..first]
        .iter()
        .chain(&points[last + 1..])
        .map(|(h, _)| *h)
        .collect();

    Ok(Interpolated {
        series: HourlySeries {
            station: series.station.clone(),
            points,
        },
        filled,
        unfilled_edges,
    })
}
