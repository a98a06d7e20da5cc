use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FlightRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Seeded uniform holdout.
    #[default]
    Random,
    /// The most recent flights (by date, then scheduled departure) are held out.
    Chronological,
}

/// Row indices of a train/test partition, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn test_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n)
}

pub fn split_indices(
    records: &[FlightRecord],
    test_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<Split> {
    if records.is_empty() {
        return Err(Error::EmptyDataset(
            "cannot split an empty record list".into(),
        ));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::arg(format!(
            "test fraction must lie strictly between 0 and 1, got {test_fraction}"
        )));
    }
    let n = records.len();
    let t = test_size(n, test_fraction);
    let mut order: Vec<usize> = (0..n).collect();
    match mode {
        SplitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            order.rotate_left(n - t);
        }
        SplitMode::Chronological => {
            order.sort_by_key(|&i| {
                let r = &records[i];
                (r.year, r.month, r.day_of_month, r.crs_dep_time)
            });
        }
    }
    let mut test = order.split_off(n - t);
    order.sort_unstable();
    test.sort_unstable();
    Ok(Split { train: order, test })
}

/// Splits records into (train, test). The test set holds
/// `max(1, round(n * test_fraction))` records.
pub fn split_train_test(
    records: &[FlightRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<FlightRecord>, Vec<FlightRecord>)> {
    let split = split_indices(records, test_fraction, seed, SplitMode::Random)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect();
    Ok((pick(&split.train), pick(&split.test)))
}
