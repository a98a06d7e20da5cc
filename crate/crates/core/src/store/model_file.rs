use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{read_json, write_json};
use crate::carrier_origin::CarrierOriginModel;
use crate::features::{EncoderSpec, Standardization};
use crate::mlp::MlpModel;
use crate::predictor::{MlpPredictor, ModelKind, Predictor};
use crate::seasonal::SeasonalModel;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub record_count: usize,
    pub trained_at: DateTime<Utc>,
    /// Training configuration as given to the trainer.
    pub config: Value,
}

/// Versioned on-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub model_type: ModelKind,
    /// Feature encoder; only the network uses one.
    pub encoders: Option<EncoderSpec>,
    pub parameters: Value,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct MlpParameters {
    network: MlpModel,
    standardization: Standardization,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Corrupt(e.to_string()))
}

fn from_value<T: for<'de> Deserialize<'de>>(v: Value, what: &str) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::InvalidModel(format!("{what} parameters: {e}")))
}

impl ModelFile {
    pub fn from_predictor(predictor: &Predictor, metadata: TrainingMetadata) -> Result<Self> {
        let (encoders, parameters) = match predictor {
            Predictor::CarrierOrigin(m) => (None, to_value(m)?),
            Predictor::Seasonal(m) => (None, to_value(m)?),
            Predictor::Mlp(p) => (
                Some(p.encoders.clone()),
                to_value(&MlpParameters {
                    network: p.network.clone(),
                    standardization: p.standardization.clone(),
                })?,
            ),
        };
        Ok(ModelFile {
            schema_version: SCHEMA_VERSION,
            model_type: predictor.kind(),
            encoders,
            parameters,
            metadata,
        })
    }

    /// Rebuilds the predictor and checks its invariants.
    pub fn to_predictor(&self) -> Result<Predictor> {
        let params = self.parameters.clone();
        let predictor = match self.model_type {
            ModelKind::CarrierOrigin => Predictor::CarrierOrigin(from_value::<CarrierOriginModel>(
                params,
                "carrier_origin",
            )?),
            ModelKind::Seasonal => {
                Predictor::Seasonal(from_value::<SeasonalModel>(params, "seasonal")?)
            }
            ModelKind::Mlp => {
                let p: MlpParameters = from_value(params, "mlp")?;
                let encoders = self
                    .encoders
                    .clone()
                    .ok_or_else(|| Error::InvalidModel("mlp model file has no encoders".into()))?;
                Predictor::Mlp(MlpPredictor {
                    network: p.network,
                    encoders,
                    standardization: p.standardization,
                })
            }
        };
        predictor.validate()?;
        Ok(predictor)
    }
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    write_json(path, file)
}

/// Loads a model file, rejecting unknown schema versions before anything
/// else is interpreted.
pub fn load_model(path: &Path) -> Result<ModelFile> {
    let value: Value = read_json(path)?;
    let version = value
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Corrupt(format!("{}: missing schema_version", path.display())))?;
    if version != u64::from(SCHEMA_VERSION) {
        return Err(Error::UnknownVersion(
            u32::try_from(version).unwrap_or(u32::MAX),
        ));
    }
    let file: ModelFile = serde_json::from_value(value)
        .map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))?;
    file.to_predictor()?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carrier_origin::CarrierOriginConfig;
    use crate::features::{encode, fit_encoders};
    use crate::ingest::{generate_synthetic, FlightRecord, SyntheticConfig};
    use crate::mlp::{train_mlp, TrainConfig};
    use crate::predictor::FlightQuery;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn metadata(n: usize) -> TrainingMetadata {
        TrainingMetadata {
            record_count: n,
            trained_at: DateTime::from_timestamp(1_700_000_000, 0).unwrap(),
            config: serde_json::json!({"seed": 42}),
        }
    }

    fn records() -> Vec<FlightRecord> {
        generate_synthetic(&SyntheticConfig::with_count(1200), 8).unwrap()
    }

    fn round_trip(p: &Predictor) -> Predictor {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&ModelFile::from_predictor(p, metadata(1)).unwrap(), &path).unwrap();
        load_model(&path).unwrap().to_predictor().unwrap()
    }

    #[test]
    fn linear_models_round_trip_bit_exactly() {
        let recs = records();
        let co = Predictor::CarrierOrigin(
            CarrierOriginModel::train(&recs, CarrierOriginConfig::default()).unwrap(),
        );
        assert_eq!(round_trip(&co), co);
        let se = Predictor::Seasonal(SeasonalModel::train(&recs).unwrap());
        assert_eq!(round_trip(&se), se);
    }

    #[test]
    fn mlp_round_trip_predicts_bit_exactly() {
        let recs: Vec<FlightRecord> = records().into_iter().filter(|r| r.is_usable()).collect();
        let spec = fit_encoders(&recs, 31).unwrap();
        let data = encode(&recs, &spec, true).unwrap();
        let config = TrainConfig {
            epochs: 1,
            batch_size: 64,
            hidden: vec![16, 8],
            ..TrainConfig::default()
        };
        let (network, _) = train_mlp(&data, &config).unwrap();
        let p = Predictor::Mlp(MlpPredictor {
            network,
            encoders: spec,
            standardization: data.standardization.unwrap(),
        });
        let back = round_trip(&p);
        let Predictor::Mlp(net) = &back else {
            panic!("wrong kind")
        };
        let Predictor::Mlp(orig) = &p else {
            unreachable!()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x: Vec<f64> = (0..orig.network.input_width())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            assert_eq!(
                orig.network.forward(&x).unwrap().to_bits(),
                net.network.forward(&x).unwrap().to_bits()
            );
        }
        let q = FlightQuery::from_record(&recs[0]).unwrap();
        assert_eq!(
            p.predict(&q, None).unwrap(),
            back.predict(&q, None).unwrap()
        );
    }

    #[test]
    fn unknown_version_is_rejected() {
        let recs = records();
        let p = Predictor::Seasonal(SeasonalModel::train(&recs).unwrap());
        let mut file = ModelFile::from_predictor(&p, metadata(1)).unwrap();
        file.schema_version = 999;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&file, &path).unwrap();
        assert!(matches!(load_model(&path), Err(Error::UnknownVersion(999))));
    }

    #[test]
    fn invariant_violations_are_rejected_on_load() {
        let recs = records();
        let p = Predictor::Seasonal(SeasonalModel::train(&recs).unwrap());
        let mut file = ModelFile::from_predictor(&p, metadata(1)).unwrap();
        file.parameters["seasons"].as_array_mut().unwrap().pop();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&file, &path).unwrap();
        assert!(matches!(load_model(&path), Err(Error::InvalidModel(_))));

        std::fs::write(&path, b"{\"schema_version\": 1, \"model_type\": ").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Corrupt(_))));
    }
}
