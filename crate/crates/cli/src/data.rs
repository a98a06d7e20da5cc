//! The ingest output directory: cleaned records, rejects and the split.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use flightstat::ingest::{parse_flights, write_flights, FlightRecord, SplitMode};
use flightstat::store::{read_json, write_json};
use flightstat::{Error, Result};
use serde::{Deserialize, Serialize};

pub const RECORDS_FILE: &str = "records.csv";
pub const REJECTS_FILE: &str = "rejects.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub mode: SplitMode,
    pub test_fraction: f64,
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    /// Positions in the records file, ascending.
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: String,
    pub parsed: usize,
    pub rejected: usize,
    pub cancelled: usize,
    pub missing_labels: usize,
    /// Records kept after dropping missing labels.
    pub records: usize,
    pub usable: usize,
    pub split: SplitManifest,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn write_records(path: &Path, records: &[FlightRecord]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_flights(BufWriter::new(file), records)
}

/// Loads the records and manifest, and returns (train, test).
pub fn load_split(dir: &Path) -> Result<(Vec<FlightRecord>, Vec<FlightRecord>, Manifest)> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    let path = dir.join(RECORDS_FILE);
    let file = File::open(&path).map_err(io_err(&path))?;
    let outcome = parse_flights(file)?;
    if !outcome.rejects.is_empty() || outcome.records.len() != manifest.records {
        return Err(Error::Corrupt(format!(
            "{} holds {} valid records and {} rejects, manifest says {}",
            path.display(),
            outcome.records.len(),
            outcome.rejects.len(),
            manifest.records
        )));
    }
    let mut is_test = vec![false; outcome.records.len()];
    for &i in &manifest.split.test_indices {
        *is_test.get_mut(i).ok_or_else(|| {
            Error::Corrupt(format!("test index {i} past the end of the records"))
        })? = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = outcome
        .records
        .into_iter()
        .zip(is_test)
        .partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(r, _)| r).collect(),
        test.into_iter().map(|(r, _)| r).collect(),
        manifest,
    ))
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

pub fn write_rejects(dir: &Path, lines: &[String]) -> Result<()> {
    let path = dir.join(REJECTS_FILE);
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(&path, text).map_err(io_err(&path))
}
