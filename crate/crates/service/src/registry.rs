use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use flightstat::carrier_origin::ImputationIndex;
use flightstat::predictor::{FlightQuery, ModelKind, Prediction, Predictor, RouteTable};
use flightstat::store::{load_model_dir, ModelSet};
use flightstat::{Error, Result};

/// Loaded predictors by name plus the lookup tables they share. Read-only
/// once the service starts.
#[derive(Debug, Default)]
pub struct ModelRegistry {
    models: BTreeMap<ModelKind, (Predictor, DateTime<Utc>)>,
    pub imputation: Option<ImputationIndex>,
    pub routes: RouteTable,
}

impl ModelRegistry {
    pub fn from_set(set: ModelSet) -> Self {
        let now = Utc::now();
        ModelRegistry {
            models: set.models.into_iter().map(|(k, p)| (k, (p, now))).collect(),
            imputation: set.imputation,
            routes: set.routes,
        }
    }

    /// Loads every model file in `dir`; a missing directory gives an empty
    /// registry.
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Self::from_set(load_model_dir(dir)?))
    }

    pub fn get(&self, kind: ModelKind) -> Option<&Predictor> {
        self.models.get(&kind).map(|(p, _)| p)
    }

    pub fn kinds(&self) -> Vec<ModelKind> {
        self.models.keys().copied().collect()
    }

    pub fn loaded_at(&self) -> BTreeMap<String, DateTime<Utc>> {
        self.models
            .iter()
            .map(|(k, (_, t))| (k.name().to_string(), *t))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn predict(&self, kind: ModelKind, query: &FlightQuery) -> Result<Prediction> {
        let predictor = self
            .get(kind)
            .ok_or_else(|| Error::NotFound(format!("model {:?} is not loaded", kind.name())))?;
        predictor.predict(query, self.imputation.as_ref())
    }
}
