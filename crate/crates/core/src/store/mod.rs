//! File-backed persistence under a single directory: model documents, the
//! user's flight list and an append-only prediction event log.

mod events;
mod flights;
mod model_file;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::carrier_origin::ImputationIndex;
use crate::predictor::{ModelKind, Predictor, RouteTable};
use crate::{Error, Result};

pub use events::{
    aggregate_events, EventLog, EventSummary, EventWindow, PredictionEvent, RequestSummary,
};
pub use flights::{FlightCriteria, FlightStore, NewFlight, UserFlight};
pub use model_file::{load_model, save_model, ModelFile, TrainingMetadata, SCHEMA_VERSION};

pub const FLIGHTS_FILE: &str = "flights.json";
pub const EVENTS_FILE: &str = "events.ndjson";
pub const MODELS_DIR: &str = "models";
pub const IMPUTATION_FILE: &str = "imputation.json";
pub const ROUTES_FILE: &str = "routes.json";

/// Writes `bytes` to a sibling temp file, syncs it and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::arg(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| Error::Corrupt(e.to_string()))?;
    text.push(b'\n');
    write_atomic(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))
}

pub fn model_path(dir: &Path, kind: ModelKind) -> PathBuf {
    dir.join(format!("{}.json", kind.name()))
}

/// Everything a models directory holds.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    pub models: BTreeMap<ModelKind, Predictor>,
    pub imputation: Option<ImputationIndex>,
    pub routes: RouteTable,
}

/// Loads every model file present in `dir` plus the imputation index and
/// route table when they exist. A missing directory yields an empty set.
pub fn load_model_dir(dir: &Path) -> Result<ModelSet> {
    let mut set = ModelSet::default();
    if !dir.exists() {
        return Ok(set);
    }
    for kind in ModelKind::ALL {
        let path = model_path(dir, kind);
        if path.exists() {
            let file = load_model(&path)?;
            if file.model_type != kind {
                return Err(Error::InvalidModel(format!(
                    "{} holds a {} model",
                    path.display(),
                    file.model_type
                )));
            }
            set.models.insert(kind, file.to_predictor()?);
        }
    }
    let imputation = dir.join(IMPUTATION_FILE);
    if imputation.exists() {
        let index: ImputationIndex = read_json(&imputation)?;
        index.validate()?;
        set.imputation = Some(index);
    }
    let routes = dir.join(ROUTES_FILE);
    if routes.exists() {
        set.routes = read_json(&routes)?;
        set.routes
            .routes
            .sort_by_key(|e| (e.origin_airport_id, e.dest_airport_id));
    }
    Ok(set)
}

/// A store directory with its flight list and event log open.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    pub flights: FlightStore,
    pub events: EventLog,
}

impl Store {
    /// Opens (creating if needed) the store rooted at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Store {
            flights: FlightStore::open(dir.join(FLIGHTS_FILE))?,
            events: EventLog::open(dir.join(EVENTS_FILE))?,
            dir,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn models_dir(&self) -> PathBuf {
        self.dir.join(MODELS_DIR)
    }

    /// True when the directory is still present and writable.
    pub fn is_reachable(&self) -> bool {
        fs::metadata(&self.dir)
            .map(|m| m.is_dir() && !m.permissions().readonly())
            .unwrap_or(false)
    }
}
