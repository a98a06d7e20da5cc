#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;

use chrono::DateTime;
use flightstat::airports::airport_by_id;
use flightstat::ingest::{generate_synthetic, FlightRecord, SyntheticConfig};
use flightstat::mlp::TrainConfig;
use flightstat::predictor::ModelKind;
use flightstat::store::MODELS_DIR;
use flightstat::training::{save_model_dir, train_model, TrainOptions};
use flightstat_service::{serve_on, AppState};
use serde_json::{json, Value};

pub struct Server {
    pub base: String,
    pub client: reqwest::Client,
    pub dir: tempfile::TempDir,
    pub route: (String, String),
}

/// Trains small models into a fresh store directory.
pub fn prepare(dir: &Path) -> Vec<FlightRecord> {
    let records = generate_synthetic(&SyntheticConfig::with_count(1500), 11).unwrap();
    let options = TrainOptions {
        mlp: TrainConfig {
            epochs: 2,
            batch_size: 64,
            hidden: vec![16],
            ..TrainConfig::default()
        },
        ..TrainOptions::default()
    };
    let models: Vec<_> = ModelKind::ALL
        .iter()
        .map(|k| train_model(*k, &records, &options).unwrap())
        .collect();
    let at = DateTime::from_timestamp(1_700_000_000, 0).unwrap();
    save_model_dir(&dir.join(MODELS_DIR), &models, &records, &options, at).unwrap();
    records
}

pub async fn start_on(dir: tempfile::TempDir, records: &[FlightRecord]) -> Server {
    let state = AppState::open(dir.path(), ModelKind::Mlp).unwrap();
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve_on(listener, state));
    let r = &records[0];
    let code = |id| airport_by_id(id).unwrap().code.to_string();
    Server {
        base: format!("http://{addr}"),
        client: reqwest::Client::new(),
        route: (code(r.origin_airport_id), code(r.dest_airport_id)),
        dir,
    }
}

pub async fn start() -> Server {
    let dir = tempfile::tempdir().unwrap();
    let records = prepare(dir.path());
    start_on(dir, &records).await
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub fn request(&self, model: &str) -> Value {
        json!({
            "model": model,
            "origin": self.route.0,
            "destination": self.route.1,
            "airline": "Delta",
            "date": "2026-03-14",
            "time": "08:15",
            "dep_delay": 12.0,
        })
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let resp = self
            .client
            .post(self.url(path))
            .json(body)
            .send()
            .await
            .unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let resp = self.client.get(self.url(path)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn delete(&self, path: &str) -> (u16, Value) {
        let resp = self.client.delete(self.url(path)).send().await.unwrap();
        let status = resp.status().as_u16();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn count(&self) -> u64 {
        self.get("/analytics/summary").await.1["count"]
            .as_u64()
            .unwrap()
    }
}
