use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{read_json, write_json};
use crate::ingest::ClockTime;
use crate::{Error, Result};

/// A flight on the user's list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserFlight {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub airline: String,
    pub date: NaiveDate,
    #[serde(with = "colon_time")]
    pub time: ClockTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewFlight {
    pub origin: String,
    pub destination: String,
    pub airline: String,
    pub date: NaiveDate,
    #[serde(with = "colon_time")]
    pub time: ClockTime,
}

impl NewFlight {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("origin", &self.origin),
            ("destination", &self.destination),
            ("airline", &self.airline),
        ] {
            if v.trim().is_empty() {
                return Err(Error::arg(format!("flight {name} must not be empty")));
            }
        }
        Ok(())
    }
}

impl UserFlight {
    pub fn departs(&self) -> NaiveDateTime {
        self.date
            .and_hms_opt(self.time.hour(), self.time.minutes_since_midnight() % 60, 0)
            .expect("valid clock time")
    }
}

/// Any subset of these narrows the search; all given fields must match.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlightCriteria {
    /// Case-insensitive match on the origin text.
    pub origin: Option<String>,
    pub date: Option<NaiveDate>,
    pub time: Option<ClockTime>,
    /// Keep only the earliest flight departing at or after this instant.
    pub next_after: Option<NaiveDateTime>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct FlightDocument {
    next_id: u64,
    flights: Vec<UserFlight>,
}

/// The flight list, rewritten atomically on every change.
#[derive(Debug)]
pub struct FlightStore {
    path: PathBuf,
    doc: Mutex<FlightDocument>,
}

fn sort_key(f: &UserFlight) -> (NaiveDate, ClockTime, &str) {
    (f.date, f.time, f.id.as_str())
}

impl FlightStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let doc = if path.exists() {
            let mut doc: FlightDocument = read_json(&path)?;
            doc.flights.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
            doc
        } else {
            FlightDocument {
                next_id: 1,
                flights: Vec::new(),
            }
        };
        Ok(FlightStore {
            path,
            doc: Mutex::new(doc),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, FlightDocument> {
        self.doc.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn add(&self, flight: NewFlight) -> Result<UserFlight> {
        flight.validate()?;
        let mut doc = self.lock();
        let stored = UserFlight {
            id: format!("flt-{}", doc.next_id),
            origin: flight.origin.trim().to_string(),
            destination: flight.destination.trim().to_string(),
            airline: flight.airline.trim().to_string(),
            date: flight.date,
            time: flight.time,
        };
        let mut next = FlightDocument {
            next_id: doc.next_id + 1,
            flights: doc.flights.clone(),
        };
        let at = next
            .flights
            .partition_point(|f| sort_key(f) < sort_key(&stored));
        next.flights.insert(at, stored.clone());
        write_json(&self.path, &next)?;
        *doc = next;
        Ok(stored)
    }

    pub fn remove(&self, id: &str) -> Result<UserFlight> {
        let mut doc = self.lock();
        let at = doc
            .flights
            .iter()
            .position(|f| f.id == id)
            .ok_or_else(|| Error::NotFound(format!("flight {id}")))?;
        let mut flights = doc.flights.clone();
        let removed = flights.remove(at);
        let next = FlightDocument {
            next_id: doc.next_id,
            flights,
        };
        write_json(&self.path, &next)?;
        *doc = next;
        Ok(removed)
    }

    /// All flights ordered by (date, time).
    pub fn list(&self) -> Vec<UserFlight> {
        self.lock().flights.clone()
    }

    pub fn get(&self, id: &str) -> Option<UserFlight> {
        self.lock().flights.iter().find(|f| f.id == id).cloned()
    }

    pub fn find(&self, criteria: &FlightCriteria) -> Vec<UserFlight> {
        let doc = self.lock();
        let matches = doc.flights.iter().filter(|f| {
            criteria
                .origin
                .as_ref()
                .is_none_or(|o| f.origin.eq_ignore_ascii_case(o.trim()))
                && criteria.date.is_none_or(|d| f.date == d)
                && criteria.time.is_none_or(|t| f.time == t)
                && criteria.next_after.is_none_or(|now| f.departs() >= now)
        });
        if criteria.next_after.is_some() {
            // the list is sorted, so the first match is the earliest
            matches.take(1).cloned().collect()
        } else {
            matches.cloned().collect()
        }
    }
}

mod colon_time {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::ingest::ClockTime;

    pub fn serialize<S: Serializer>(t: &ClockTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_colon_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ClockTime, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flight(origin: &str, date: &str, time: &str) -> NewFlight {
        NewFlight {
            origin: origin.into(),
            destination: "Seattle".into(),
            airline: "Delta".into(),
            date: date.parse().unwrap(),
            time: time.parse().unwrap(),
        }
    }

    fn store() -> (tempfile::TempDir, FlightStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = FlightStore::open(dir.path().join("flights.json")).unwrap();
        (dir, s)
    }

    #[test]
    fn add_then_list() {
        let (_d, s) = store();
        let f = s.add(flight("Boston", "2026-11-02", "08:15")).unwrap();
        assert_eq!(s.list(), vec![f]);
    }

    #[test]
    fn remove_keeps_the_rest() {
        let (_d, s) = store();
        let a = s.add(flight("Boston", "2026-11-02", "08:15")).unwrap();
        let b = s.add(flight("Denver", "2026-11-03", "09:00")).unwrap();
        assert_ne!(a.id, b.id);
        s.remove(&a.id).unwrap();
        assert_eq!(s.list(), vec![b]);
        assert!(matches!(s.remove(&a.id), Err(Error::NotFound(_))));
    }

    #[test]
    fn list_is_sorted_and_persisted() {
        let (dir, s) = store();
        s.add(flight("C", "2026-12-01", "10:00")).unwrap();
        s.add(flight("A", "2026-11-01", "23:00")).unwrap();
        s.add(flight("B", "2026-12-01", "06:30")).unwrap();
        let origins: Vec<String> = s.list().into_iter().map(|f| f.origin).collect();
        assert_eq!(origins, ["A", "B", "C"]);
        let reopened = FlightStore::open(dir.path().join("flights.json")).unwrap();
        assert_eq!(reopened.list(), s.list());
        let next = reopened.add(flight("D", "2027-01-01", "10:00")).unwrap();
        assert_eq!(next.id, "flt-4");
    }

    #[test]
    fn find_by_each_criterion() {
        let (_d, s) = store();
        let flights = [
            flight("Chicago", "2026-11-05", "17:00"),
            flight("Boston", "2026-11-03", "12:00"),
            flight("chicago", "2026-11-04", "07:45"),
        ];
        for f in &flights {
            s.add(f.clone()).unwrap();
        }
        let by_origin = s.find(&FlightCriteria {
            origin: Some("CHICAGO".into()),
            ..FlightCriteria::default()
        });
        assert_eq!(by_origin.len(), 2);
        let by_when = s.find(&FlightCriteria {
            date: Some("2026-11-03".parse().unwrap()),
            time: Some("12:00".parse().unwrap()),
            ..FlightCriteria::default()
        });
        assert_eq!(by_when[0].origin, "Boston");

        let now: NaiveDateTime = "2026-11-01T00:00:00".parse().unwrap();
        let next = s.find(&FlightCriteria {
            next_after: Some(now),
            ..FlightCriteria::default()
        });
        // sort oracle over the inputs
        let mut all: Vec<_> = flights.iter().map(|f| (f.date, f.time)).collect();
        all.sort();
        assert_eq!(next.len(), 1);
        assert_eq!((next[0].date, next[0].time), all[0]);

        let later: NaiveDateTime = "2026-11-04T08:00:00".parse().unwrap();
        let next = s.find(&FlightCriteria {
            next_after: Some(later),
            ..FlightCriteria::default()
        });
        assert_eq!(next[0].date.to_string(), "2026-11-05");
    }

    #[test]
    fn empty_attributes_are_rejected() {
        let (_d, s) = store();
        let mut f = flight("Boston", "2026-11-02", "08:15");
        f.airline = " ".into();
        assert!(s.add(f).is_err());
        assert!(s.list().is_empty());
    }

    #[test]
    fn time_serializes_with_colon() {
        let (_d, s) = store();
        let f = s.add(flight("Boston", "2026-11-02", "08:15")).unwrap();
        let v = serde_json::to_value(&f).unwrap();
        assert_eq!(v["time"], "08:15");
        assert_eq!(v["date"], "2026-11-02");
    }
}
