//! Turns a user-facing flight description (cities or codes, airline name,
//! calendar date and clock time) into a [`FlightQuery`].

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::airports::{resolve_airport, resolve_carrier};
use crate::dialog::FlightRequest;
use crate::ingest::ClockTime;
use crate::predictor::{FlightQuery, RouteTable};
use crate::store::RequestSummary;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    /// Model name, or "all"; the caller's default when absent.
    #[serde(default)]
    pub model: Option<String>,
    pub origin: String,
    pub destination: String,
    pub airline: String,
    /// `YYYY-MM-DD`
    pub date: String,
    /// `HH:MM`
    pub time: String,
    #[serde(default)]
    pub dep_delay: Option<f64>,
    #[serde(default)]
    pub distance: Option<f64>,
    #[serde(default)]
    pub flight_num: Option<String>,
}

impl From<&FlightRequest> for PredictRequest {
    fn from(r: &FlightRequest) -> Self {
        PredictRequest {
            model: None,
            origin: r.origin.clone(),
            destination: r.destination.clone(),
            airline: r.airline.clone(),
            date: r.date.to_string(),
            time: r.time.to_colon_string(),
            ..PredictRequest::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRequest {
    pub query: FlightQuery,
    pub summary: RequestSummary,
}

/// Resolves airports through the bundled directory and the distance (when
/// not given) through `routes`. Malformed fields are argument errors; an
/// unknown airport or a route without a known distance is unresolvable.
pub fn resolve_request(req: &PredictRequest, routes: &RouteTable) -> Result<ResolvedRequest> {
    let date = NaiveDate::parse_from_str(req.date.trim(), "%Y-%m-%d")
        .map_err(|_| Error::arg(format!("date {:?} is not YYYY-MM-DD", req.date)))?;
    let time: ClockTime = req.time.parse()?;
    if req.airline.trim().is_empty() {
        return Err(Error::arg("airline must not be empty"));
    }
    if let Some(d) = req.dep_delay {
        if !d.is_finite() {
            return Err(Error::arg("dep_delay must be finite"));
        }
    }
    let origin = resolve_airport(&req.origin)
        .ok_or_else(|| Error::Unresolvable(format!("airport {:?}", req.origin)))?;
    let dest = resolve_airport(&req.destination)
        .ok_or_else(|| Error::Unresolvable(format!("airport {:?}", req.destination)))?;
    // unknown airlines still predict through the fallback paths
    let carrier = resolve_carrier(&req.airline)
        .map(|c| c.code.to_string())
        .unwrap_or_else(|| req.airline.trim().to_uppercase());
    let distance = match req.distance {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(Error::arg(format!("distance must be positive, got {d}"))),
        None => routes.distance(origin.id, dest.id).ok_or_else(|| {
            Error::Unresolvable(format!(
                "distance from {} to {}: route not in the distance table",
                origin.code, dest.code
            ))
        })?,
    };
    Ok(ResolvedRequest {
        query: FlightQuery {
            carrier,
            origin_airport_id: origin.id,
            dest_airport_id: dest.id,
            date,
            crs_dep_time: time,
            crs_arr_time: routes.arrival_time(origin.id, dest.id, time),
            flight_num: req.flight_num.clone(),
            distance,
            dep_delay: req.dep_delay,
        },
        summary: RequestSummary {
            origin: req.origin.trim().to_string(),
            destination: req.destination.trim().to_string(),
            airline: req.airline.trim().to_string(),
            date: date.to_string(),
            time: time.to_colon_string(),
        },
    })
}
