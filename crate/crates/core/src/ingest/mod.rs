//! Raw on-time performance data: parsing, cleaning, interpolation, splitting
//! and synthetic generation.

mod interpolate;
mod parse;
mod split;
mod synthetic;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use interpolate::{interpolate_hourly, HourlySeries, Interpolated};
pub use parse::{parse_flights, write_flights, ParseOutcome, RawRow, Reject, COLUMNS};
pub use split::{split_indices, split_train_test, Split, SplitMode};
pub use synthetic::{
    generate_synthetic, time_of_day_effect, SeasonCoefficients, SyntheticConfig, SyntheticManifest,
};

/// Scheduled clock time in `HHMM` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct ClockTime(u16);

impl ClockTime {
    pub fn new(hhmm: u16) -> Result<Self> {
        if hhmm >= 2400 || hhmm % 100 >= 60 {
            return Err(Error::arg(format!("{hhmm} is not a valid HHMM clock time")));
        }
        Ok(ClockTime(hhmm))
    }

    pub fn from_hm(hour: u32, minute: u32) -> Result<Self> {
        if hour >= 24 || minute >= 60 {
            return Err(Error::arg(format!(
                "{hour}:{minute} is not a valid clock time"
            )));
        }
        Ok(ClockTime((hour * 100 + minute) as u16))
    }

    /// Wraps minutes past midnight onto a 24 hour clock.
    pub fn from_minutes(minutes: u32) -> Self {
        let m = minutes % 1440;
        ClockTime(((m / 60) * 100 + m % 60) as u16)
    }

    pub fn hhmm(self) -> u16 {
        self.0
    }

    pub fn hour(self) -> u32 {
        u32::from(self.0 / 100)
    }

    pub fn minutes_since_midnight(self) -> u32 {
        u32::from(self.0 / 100) * 60 + u32::from(self.0 % 100)
    }
}

impl ClockTime {
    /// `HH:MM` rendering.
    pub fn to_colon_string(self) -> String {
        format!("{:02}:{:02}", self.0 / 100, self.0 % 100)
    }
}

impl std::str::FromStr for ClockTime {
    type Err = Error;

    /// Accepts `HH:MM`, `H:MM` or `HHMM`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::arg(format!("{s:?} is not a clock time"));
        if let Some((h, m)) = s.split_once(':') {
            if m.len() != 2 || h.is_empty() || h.len() > 2 {
                return Err(bad());
            }
            let h: u32 = h.parse().map_err(|_| bad())?;
            let m: u32 = m.parse().map_err(|_| bad())?;
            ClockTime::from_hm(h, m)
        } else if s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()) {
            ClockTime::new(s.parse().map_err(|_| bad())?)
        } else {
            Err(bad())
        }
    }
}

impl TryFrom<u16> for ClockTime {
    type Error = Error;

    fn try_from(value: u16) -> Result<Self> {
        ClockTime::new(value)
    }
}

impl From<ClockTime> for u16 {
    fn from(value: ClockTime) -> u16 {
        value.0
    }
}

impl fmt::Display for ClockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.0)
    }
}

/// One cleaned row of the on-time performance data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub year: i32,
    pub quarter: u8,
    pub month: u8,
    pub day_of_month: u8,
    pub day_of_week: u8,
    pub flight_num: String,
    pub carrier: String,
    pub origin_airport_id: i64,
    pub dest_airport_id: i64,
    pub dest_wac: i64,
    pub crs_dep_time: ClockTime,
    pub crs_arr_time: ClockTime,
    /// Miles.
    pub distance: f64,
    /// Minutes, negative when early. Absent for cancelled flights.
    pub dep_delay: Option<f64>,
    /// Minutes, negative when early. Absent for cancelled or diverted flights.
    pub arr_delay: Option<f64>,
    pub arr_del15: Option<bool>,
    pub cancelled: bool,
}

impl FlightRecord {
    /// A record the regression models can learn from: flown, with both
    /// delays measured.
    pub fn is_usable(&self) -> bool {
        !self.cancelled && self.dep_delay.is_some() && self.arr_delay.is_some()
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if !(1..=4).contains(&self.quarter) {
            return Err(format!("QUARTER {} out of range 1-4", self.quarter));
        }
        if !(1..=12).contains(&self.month) {
            return Err(format!("MONTH {} out of range 1-12", self.month));
        }
        if !(1..=31).contains(&self.day_of_month) {
            return Err(format!(
                "DAY_OF_MONTH {} out of range 1-31",
                self.day_of_month
            ));
        }
        if !(1..=7).contains(&self.day_of_week) {
            return Err(format!("DAY_OF_WEEK {} out of range 1-7", self.day_of_week));
        }
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(format!("DISTANCE {} must be positive", self.distance));
        }
        for (name, v) in [("DEP_DELAY", self.dep_delay), ("ARR_DELAY", self.arr_delay)] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(format!("{name} is not finite"));
                }
            }
        }
        if self.flight_num.trim().is_empty() {
            return Err("FLIGHT_NUM is empty".into());
        }
        if self.carrier.trim().is_empty() {
            return Err("CARRIER is empty".into());
        }
        Ok(())
    }
}

/// Keeps exactly the records whose arrival label is present, in order.
pub fn drop_missing_labels(records: Vec<FlightRecord>) -> Vec<FlightRecord> {
    records
        .into_iter()
        .filter(|r| r.arr_del15.is_some())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record() -> FlightRecord {
        FlightRecord {
            year: 2019,
            quarter: 3,
            month: 7,
            day_of_month: 4,
            day_of_week: 4,
            flight_num: "1234".into(),
            carrier: "DL".into(),
            origin_airport_id: 10397,
            dest_airport_id: 10721,
            dest_wac: 13,
            crs_dep_time: ClockTime::new(1330).unwrap(),
            crs_arr_time: ClockTime::new(1605).unwrap(),
            distance: 946.0,
            dep_delay: Some(-3.0),
            arr_delay: Some(-8.0),
            arr_del15: Some(false),
            cancelled: false,
        }
    }

    #[test]
    fn clock_time_text_forms() {
        assert_eq!("17:30".parse::<ClockTime>().unwrap().hhmm(), 1730);
        assert_eq!("7:05".parse::<ClockTime>().unwrap().hhmm(), 705);
        assert_eq!("0915".parse::<ClockTime>().unwrap().hhmm(), 915);
        assert!("24:00".parse::<ClockTime>().is_err());
        assert!("12:5".parse::<ClockTime>().is_err());
        assert!("noon".parse::<ClockTime>().is_err());
        assert_eq!(ClockTime::new(905).unwrap().to_colon_string(), "09:05");
    }

    #[test]
    fn clock_time_bounds() {
        assert!(ClockTime::new(2359).is_ok());
        assert!(ClockTime::new(2400).is_err());
        assert!(ClockTime::new(1260).is_err());
        assert_eq!(ClockTime::new(1330).unwrap().minutes_since_midnight(), 810);
        assert_eq!(ClockTime::new(0).unwrap().minutes_since_midnight(), 0);
        assert_eq!(
            ClockTime::from_minutes(1440 + 61),
            ClockTime::new(101).unwrap()
        );
        assert_eq!(ClockTime::new(5).unwrap().to_string(), "0005");
    }

    #[test]
    fn drop_missing_labels_keeps_order() {
        let a = record();
        let mut b = record();
        b.arr_del15 = None;
        let mut c = record();
        c.flight_num = "99".into();
        let out = drop_missing_labels(vec![a.clone(), b, c.clone()]);
        assert_eq!(out, vec![a, c]);
    }

    #[test]
    fn drop_missing_labels_identity_and_idempotent() {
        let rs = vec![record(), record()];
        let once = drop_missing_labels(rs.clone());
        assert_eq!(once, rs);
        assert_eq!(drop_missing_labels(once.clone()), once);
    }

    #[test]
    fn usable_excludes_cancelled() {
        let mut r = record();
        assert!(r.is_usable());
        r.cancelled = true;
        assert!(!r.is_usable());
    }
}
