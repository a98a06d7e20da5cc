use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::predictor::{ModelKind, Prediction, Provenance};
use crate::{Error, Result, DELAY_THRESHOLD_MINUTES};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub origin: String,
    pub destination: String,
    pub airline: String,
    pub date: String,
    pub time: String,
}

/// One logged prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEvent {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub model: ModelKind,
    pub request: RequestSummary,
    pub predicted_delay: f64,
    pub provenance: Provenance,
}

/// Selects events by inclusive sequence range and half-open time range.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventWindow {
    pub seq_from: Option<u64>,
    pub seq_to: Option<u64>,
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl EventWindow {
    pub fn contains(&self, e: &PredictionEvent) -> bool {
        self.seq_from.is_none_or(|s| e.seq >= s)
            && self.seq_to.is_none_or(|s| e.seq <= s)
            && self.from.is_none_or(|t| e.timestamp >= t)
            && self.to.is_none_or(|t| e.timestamp < t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub count: usize,
    /// Every model name is present, zero when unused.
    pub per_model: BTreeMap<String, usize>,
    /// Absent when the window holds no events.
    pub mean_predicted_delay: Option<f64>,
    pub delayed_share: Option<f64>,
}

pub fn aggregate_events<'a>(
    events: impl IntoIterator<Item = &'a PredictionEvent>,
    window: &EventWindow,
) -> EventSummary {
    let mut per_model: BTreeMap<String, usize> = ModelKind::ALL
        .iter()
        .map(|k| (k.name().to_string(), 0))
        .collect();
    let (mut count, mut sum, mut delayed) = (0usize, 0.0, 0usize);
    for e in events.into_iter().filter(|e| window.contains(e)) {
        count += 1;
        sum += e.predicted_delay;
        if e.predicted_delay > DELAY_THRESHOLD_MINUTES {
            delayed += 1;
        }
        *per_model.entry(e.model.name().to_string()).or_default() += 1;
    }
    EventSummary {
        count,
        per_model,
        mean_predicted_delay: (count > 0).then(|| sum / count as f64),
        delayed_share: (count > 0).then(|| delayed as f64 / count as f64),
    }
}

#[derive(Debug)]
struct LogState {
    file: File,
    next_seq: u64,
}

/// Newline-delimited JSON, one event per line, appended under a mutex.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    state: Mutex<LogState>,
}

/// Parses every complete line. Returns the events and the byte length of
/// the valid prefix; anything after it is a torn final write.
fn scan(path: &Path, bytes: &[u8]) -> Result<(Vec<PredictionEvent>, usize)> {
    let mut events = Vec::new();
    let mut valid = 0;
    let mut start = 0;
    while start < bytes.len() {
        let Some(nl) = bytes[start..].iter().position(|&b| b == b'\n') else {
            break;
        };
        let line = &bytes[start..start + nl];
        let end = start + nl + 1;
        match serde_json::from_slice::<PredictionEvent>(line) {
            Ok(e) => {
                let expected = events.last().map_or(1, |p: &PredictionEvent| p.seq + 1);
                if e.seq != expected {
                    return Err(Error::Corrupt(format!(
                        "{}: sequence {} where {expected} was expected",
                        path.display(),
                        e.seq
                    )));
                }
                events.push(e);
                valid = end;
            }
            // a terminated but unparsable last line is treated as torn too
            Err(_) if end == bytes.len() => break,
            Err(e) => return Err(Error::Corrupt(format!("{}: {e}", path.display()))),
        }
        start = end;
    }
    Ok((events, valid))
}

impl EventLog {
    /// Opens the log, dropping a partially written final record if present.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let (events, valid) = scan(&path, &bytes)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        if valid < bytes.len() {
            file.set_len(valid as u64)
                .map_err(|e| Error::io(&path, e))?;
        }
        Ok(EventLog {
            state: Mutex::new(LogState {
                file,
                next_seq: events.last().map_or(1, |e| e.seq + 1),
            }),
            path,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Number of committed events.
    pub fn len(&self) -> u64 {
        self.state
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .next_seq
            - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(
        &self,
        request: RequestSummary,
        prediction: &Prediction,
    ) -> Result<PredictionEvent> {
        self.append_at(request, prediction, Utc::now())
    }

    /// Appends with an explicit timestamp. The sequence number is assigned
    /// under the lock and only consumed once the line is written.
    pub fn append_at(
        &self,
        request: RequestSummary,
        prediction: &Prediction,
        timestamp: DateTime<Utc>,
    ) -> Result<PredictionEvent> {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let event = PredictionEvent {
            seq: state.next_seq,
            timestamp,
            model: prediction.model,
            request,
            predicted_delay: prediction.minutes,
            provenance: prediction.provenance.clone(),
        };
        let mut line = serde_json::to_vec(&event).map_err(|e| Error::Corrupt(e.to_string()))?;
        line.push(b'\n');
        state
            .file
            .write_all(&line)
            .map_err(|e| Error::io(&self.path, e))?;
        state.next_seq += 1;
        Ok(event)
    }

    /// All committed events, in sequence order.
    pub fn read_all(&self) -> Result<Vec<PredictionEvent>> {
        let _guard = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let bytes = fs::read(&self.path).map_err(|e| Error::io(&self.path, e))?;
        Ok(scan(&self.path, &bytes)?.0)
    }

    pub fn aggregate(&self, window: &EventWindow) -> Result<EventSummary> {
        Ok(aggregate_events(&self.read_all()?, window))
    }
}
