//! Scoring predictors on held-out or training records.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::features::encode_with;
use crate::ingest::FlightRecord;
use crate::mlp::predict_in_blocks;
use crate::numerics::{evaluate, MetricReport};
use crate::predictor::{FlightQuery, ModelKind, Predictor};
use crate::{Error, Result};

const MLP_BLOCK_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub model: ModelKind,
    pub label: String,
    /// Which records were scored, e.g. "train" or "test".
    pub split: String,
    pub metrics: MetricReport,
}

/// Predictions for every usable record, in input order, together with the
/// observed arrival delays.
pub fn predict_records(
    predictor: &Predictor,
    records: &[FlightRecord],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let usable: Vec<FlightRecord> = records.iter().filter(|r| r.is_usable()).cloned().collect();
    if usable.is_empty() {
        return Err(Error::EmptyDataset("no usable records to evaluate".into()));
    }
    let y: Vec<f64> = usable
        .iter()
        .map(|r| r.arr_delay.unwrap_or_default())
        .collect();
    let y_hat = match predictor {
        Predictor::Mlp(p) => {
            let data = encode_with(&usable, &p.encoders, Some(&p.standardization))?;
            predict_in_blocks(&p.network, data.x.view(), MLP_BLOCK_ROWS)?.to_vec()
        }
        _ => usable
            .iter()
            .map(|r| {
                Ok(predictor
                    .predict(&FlightQuery::from_record(r)?, None)?
                    .minutes)
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    Ok((y, y_hat))
}

pub fn evaluate_predictor(
    predictor: &Predictor,
    records: &[FlightRecord],
    split: &str,
) -> Result<ModelEvaluation> {
    let (y, y_hat) = predict_records(predictor, records)?;
    let kind = predictor.kind();
    Ok(ModelEvaluation {
        model: kind,
        label: kind.label().to_string(),
        split: split.to_string(),
        metrics: evaluate(&y, &y_hat, predictor.regressor_count())?,
    })
}

fn percent(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

/// Renders evaluations as a text table, one block per split.
pub fn format_table(rows: &[ModelEvaluation]) -> String {
    let mut out = String::new();
    let mut splits: Vec<&str> = Vec::new();
    for r in rows {
        if !splits.contains(&r.split.as_str()) {
            splits.push(&r.split);
        }
    }
    for (i, split) in splits.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "Split: {split}");
        let _ = writeln!(
            out,
            "{:<26} {:>12} {:>9} {:>10} {:>8} {:>9} {:>7}",
            "Model", "Adjusted R²", "R²", "MSE", "MAE", "Accuracy", "n"
        );
        for r in rows.iter().filter(|r| r.split == *split) {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{:<26} {:>12} {:>9} {:>10.3} {:>8.3} {:>9} {:>7}",
                r.label,
                percent(m.adjusted_r_squared),
                percent(m.r_squared),
                m.mse,
                m.mae,
                percent(m.accuracy),
                m.n
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carrier_origin::{CarrierOriginConfig, CarrierOriginModel};
    use crate::ingest::{generate_synthetic, SyntheticConfig};
    use crate::seasonal::SeasonalModel;

    #[test]
    fn noiseless_carrier_origin_scores_perfectly() {
        let records = generate_synthetic(&SyntheticConfig::linear(800, 0.9, 0.01), 4).unwrap();
        let model = CarrierOriginModel::train(&records, CarrierOriginConfig::default()).unwrap();
        let eval = evaluate_predictor(&Predictor::CarrierOrigin(model), &records, "train").unwrap();
        assert!(eval.metrics.adjusted_r_squared >= 0.999);
        assert_eq!(eval.metrics.k, 2);
        assert_eq!(eval.label, "Model 1 – Carrier Origin");
    }

    #[test]
    fn skips_unusable_records() {
        let config = SyntheticConfig {
            cancelled_fraction: 0.2,
            ..SyntheticConfig::with_count(500)
        };
        let records = generate_synthetic(&config, 1).unwrap();
        let model = SeasonalModel::train(&records).unwrap();
        let eval = evaluate_predictor(&Predictor::Seasonal(model), &records, "train").unwrap();
        assert_eq!(
            eval.metrics.n,
            records.iter().filter(|r| r.is_usable()).count()
        );
    }

    #[test]
    fn table_lists_each_split_with_labels() {
        let records = generate_synthetic(&SyntheticConfig::with_count(600), 2).unwrap();
        let model = Predictor::Seasonal(SeasonalModel::train(&records).unwrap());
        let rows = vec![
            evaluate_predictor(&model, &records[..300], "train").unwrap(),
            evaluate_predictor(&model, &records[300..], "test").unwrap(),
        ];
        let table = format_table(&rows);
        assert!(table.contains("Split: train"));
        assert!(table.contains("Split: test"));
        assert_eq!(table.matches("Model 2 – Seasonal").count(), 2);
        assert!(table.contains('%'));
    }

    #[test]
    fn empty_input_is_an_error() {
        let records = generate_synthetic(&SyntheticConfig::with_count(100), 2).unwrap();
        let model = Predictor::Seasonal(SeasonalModel::train(&records).unwrap());
        assert!(matches!(
            evaluate_predictor(&model, &[], "test"),
            Err(Error::EmptyDataset(_))
        ));
    }
}
