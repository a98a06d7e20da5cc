//! Trains any of the three predictors from records and writes a model
//! directory the store can load back.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::carrier_origin::{
    CarrierOriginConfig, CarrierOriginModel, ImputationIndex, DEFAULT_SUPPORT_THRESHOLD,
};
use crate::features::{encode, fit_encoders, DEFAULT_ONE_HOT_CUTOFF};
use crate::ingest::FlightRecord;
use crate::mlp::{train_mlp, TrainConfig, TrainHistory};
use crate::predictor::{MlpPredictor, ModelKind, Predictor, RouteTable};
use crate::seasonal::SeasonalModel;
use crate::store::{
    model_path, save_model, write_json, ModelFile, TrainingMetadata, IMPUTATION_FILE, ROUTES_FILE,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub carrier_origin: CarrierOriginConfig,
    pub mlp: TrainConfig,
    pub one_hot_cutoff: usize,
    pub imputation_support: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            carrier_origin: CarrierOriginConfig::default(),
            mlp: TrainConfig::default(),
            one_hot_cutoff: DEFAULT_ONE_HOT_CUTOFF,
            imputation_support: DEFAULT_SUPPORT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub predictor: Predictor,
    /// Configuration recorded in the model file.
    pub config: Value,
    pub record_count: usize,
    pub history: Option<TrainHistory>,
}

pub fn train_model(
    kind: ModelKind,
    records: &[FlightRecord],
    options: &TrainOptions,
) -> Result<TrainedModel> {
    let usable: Vec<FlightRecord> = records.iter().filter(|r| r.is_usable()).cloned().collect();
    match kind {
        ModelKind::CarrierOrigin => Ok(TrainedModel {
            predictor: Predictor::CarrierOrigin(CarrierOriginModel::train(
                &usable,
                options.carrier_origin,
            )?),
            config: json!(options.carrier_origin),
            record_count: usable.len(),
            history: None,
        }),
        ModelKind::Seasonal => Ok(TrainedModel {
            predictor: Predictor::Seasonal(SeasonalModel::train(&usable)?),
            config: json!({}),
            record_count: usable.len(),
            history: None,
        }),
        ModelKind::Mlp => {
            if usable.is_empty() {
                return Err(Error::EmptyDataset(
                    "no usable records to train the network".into(),
                ));
            }
            let encoders = fit_encoders(&usable, options.one_hot_cutoff)?;
            let dataset = encode(&usable, &encoders, true)?;
            let standardization = dataset
                .standardization
                .clone()
                .ok_or_else(|| Error::arg("standardized encoding produced no parameters"))?;
            let (network, history) = train_mlp(&dataset, &options.mlp)?;
            Ok(TrainedModel {
                predictor: Predictor::Mlp(MlpPredictor {
                    network,
                    encoders,
                    standardization,
                }),
                config: json!({ "train": options.mlp, "one_hot_cutoff": options.one_hot_cutoff }),
                record_count: usable.len(),
                history: Some(history),
            })
        }
    }
}

/// Writes one file per model plus the imputation index and route table
/// built from `records` into `dir`.
pub fn save_model_dir(
    dir: &Path,
    models: &[TrainedModel],
    records: &[FlightRecord],
    options: &TrainOptions,
    trained_at: DateTime<Utc>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    for m in models {
        let metadata = TrainingMetadata {
            record_count: m.record_count,
            trained_at,
            config: m.config.clone(),
        };
        save_model(
            &ModelFile::from_predictor(&m.predictor, metadata)?,
            &model_path(dir, m.predictor.kind()),
        )?;
    }
    write_json(
        &dir.join(IMPUTATION_FILE),
        &ImputationIndex::build(records, options.imputation_support),
    )?;
    write_json(&dir.join(ROUTES_FILE), &RouteTable::build(records))?;
    Ok(())
}
