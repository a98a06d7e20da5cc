use std::fs::File;
use std::path::PathBuf;

use flightstat::features::{derive_delay_labels, select_features};
use flightstat::ingest::{drop_missing_labels, parse_flights};
use flightstat::seasonal::season_of;
use serde_json::Value;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn sample_matches_hand_checked_manifest() {
    let manifest: Value =
        serde_json::from_reader(File::open(fixtures().join("sample_manifest.json")).unwrap())
            .unwrap();
    let outcome =
        parse_flights(File::open(fixtures().join("sample_flights.csv")).unwrap()).unwrap();
    assert!(outcome.rejects.is_empty(), "{:?}", outcome.rejects);
    assert_eq!(
        outcome.records.len() as u64,
        manifest["rows"].as_u64().unwrap()
    );
    let cancelled = outcome.records.iter().filter(|r| r.cancelled).count();
    assert_eq!(cancelled as u64, manifest["cancelled"].as_u64().unwrap());

    let cleaned = drop_missing_labels(outcome.records.clone());
    assert_eq!(
        (outcome.records.len() - cleaned.len()) as u64,
        manifest["missing_labels"].as_u64().unwrap()
    );
    let usable = cleaned.iter().filter(|r| r.is_usable()).count();
    assert_eq!(
        usable as u64,
        manifest["usable_after_label_cleaning"].as_u64().unwrap()
    );

    for row in manifest["checked"].as_array().unwrap() {
        // line 1 is the header
        let record = &outcome.records[row["line"].as_u64().unwrap() as usize - 2];
        let selected = select_features(record);
        let labels = derive_delay_labels(record);
        assert_eq!(record.carrier, row["carrier"].as_str().unwrap());
        assert_eq!(u64::from(selected.month), row["month"].as_u64().unwrap());
        assert_eq!(
            season_of(selected.month).unwrap().name(),
            row["season"].as_str().unwrap()
        );
        assert_eq!(
            u64::from(selected.crs_dep_minutes),
            row["crs_dep_minutes"].as_u64().unwrap()
        );
        assert_eq!(
            u64::from(selected.crs_arr_minutes),
            row["crs_arr_minutes"].as_u64().unwrap()
        );
        assert_eq!(selected.distance, row["distance"].as_f64().unwrap());
        assert_eq!(labels.departure, row["dep_delayed"].as_bool().unwrap());
        assert_eq!(labels.arrival, row["arr_delayed"].as_bool().unwrap());
    }
}
