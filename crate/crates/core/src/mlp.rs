//! Fully connected regression network trained with mini-batch SGD.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::EncodedDataset;
use crate::{Error, Result, DEFAULT_SEED};

pub const DEFAULT_HIDDEN: [usize; 4] = [300, 200, 100, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Rectifier,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Rectifier => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Rectifier => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// out × in
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// A network plus the target scaling used during training. The network
/// itself predicts the standardized target; [`MlpModel::forward`] maps it
/// back to minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpWire", into = "MlpWire")]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub input_columns: Vec<String>,
    pub target_mean: f64,
    pub target_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients of the batch MSE, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.bias.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Glorot-uniform weights, zero biases, rectifier hidden layers and an
/// identity output layer.
pub fn init_mlp(sizes: &[usize], seed: u64) -> Result<MlpModel> {
    init_mlp_with(sizes, seed, Activation::Rectifier)
}

pub fn init_mlp_with(sizes: &[usize], seed: u64, hidden: Activation) -> Result<MlpModel> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::arg(format!(
            "layer sizes must be at least two positive integers, got {sizes:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = sizes.len() - 2;
    let layers = sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights =
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..=limit));
            DenseLayer {
                weights,
                bias: Array1::zeros(fan_out),
                activation: if i == last {
                    Activation::Identity
                } else {
                    hidden
                },
            }
        })
        .collect();
    Ok(MlpModel {
        layers,
        input_columns: (0..sizes[0]).map(|i| format!("x{i}")).collect(),
        target_mean: 0.0,
        target_sd: 1.0,
    })
}

impl MlpModel {
    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_width()];
        sizes.extend(self.layers.iter().map(DenseLayer::outputs));
        sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Network output before target de-standardization.
    pub fn forward_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_width() {
            return Err(Error::arg(format!(
                "expected {} inputs, got {}",
                self.input_width(),
                x.len()
            )));
        }
        let mut a = Array1::from(x.to_vec());
        for layer in &self.layers {
            let mut z = layer.weights.dot(&a) + &layer.bias;
            z.mapv_inplace(|v| layer.activation.apply(v));
            a = z;
        }
        Ok(a[0])
    }

    /// Prediction in minutes.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward_raw(x)? * self.target_sd + self.target_mean)
    }

    /// Raw outputs for every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.input_width() {
            return Err(Error::arg(format!(
                "expected {} inputs, got {}",
                self.input_width(),
                x.ncols()
            )));
        }
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = affine(a.view(), layer);
            a.mapv_inplace(|v| layer.activation.apply(v));
        }
        Ok(a.column(0).to_owned())
    }

    /// Predictions in minutes for every row of `x`.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self
            .forward_batch(x)?
            .mapv(|v| v * self.target_sd + self.target_mean))
    }

    pub fn is_finite(&self) -> bool {
        self.target_mean.is_finite()
            && self.target_sd.is_finite()
            && self
                .layers
                .iter()
                .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        let Some(last) = self.layers.last() else {
            return bad("network has no layers".into());
        };
        if last.outputs() != 1 || last.activation != Activation::Identity {
            return bad("output layer must be a single identity unit".into());
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return bad(format!(
                    "layer {} output does not match layer {} input",
                    i,
                    i + 1
                ));
            }
        }
        if self
            .layers
            .iter()
            .any(|l| l.bias.len() != l.outputs() || l.inputs() == 0)
        {
            return bad("bias length does not match layer width".into());
        }
        if self.input_columns.len() != self.input_width() {
            return bad("input column names do not match input width".into());
        }
        if !self.is_finite() || self.target_sd <= 0.0 {
            return bad("parameters must be finite with positive target scale".into());
        }
        Ok(())
    }

    fn step(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.scaled_add(-lr, &g.weights);
            layer.bias.scaled_add(-lr, &g.bias);
        }
    }
}

fn affine(a: ArrayView2<f64>, layer: &DenseLayer) -> Array2<f64> {
    a.dot(&layer.weights.t()) + &layer.bias
}

/// Batch MSE of the raw network output against `y` and its exact gradient
/// with respect to every weight and bias.
pub fn loss_and_gradients(
    model: &MlpModel,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<(f64, Gradients)> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::arg("empty batch"));
    }
    if y.len() != n {
        return Err(Error::arg(format!(
            "batch has {n} rows but {} targets",
            y.len()
        )));
    }
    if x.ncols() != model.input_width() {
        return Err(Error::arg(format!(
            "expected {} inputs, got {}",
            model.input_width(),
            x.ncols()
        )));
    }
    // activations[i] feeds layer i; pre[i] is layer i's affine output
    let mut activations = Vec::with_capacity(model.layers.len() + 1);
    let mut pre = Vec::with_capacity(model.layers.len());
    activations.push(x.to_owned());
    for layer in &model.layers {
        let z = affine(activations.last().expect("input").view(), layer);
        activations.push(z.mapv(|v| layer.activation.apply(v)));
        pre.push(z);
    }
    let out = activations.last().expect("output").column(0).to_owned();
    let residual = &out - &y;
    let mse = residual.dot(&residual) / n as f64;

    let mut delta = (residual * (2.0 / n as f64)).insert_axis(Axis(1));
    let mut layers = Vec::with_capacity(model.layers.len());
    for (i, layer) in model.layers.iter().enumerate().rev() {
        delta.zip_mut_with(&pre[i], |d, &z| *d *= layer.activation.derivative(z));
        let weights = delta.t().dot(&activations[i]);
        let bias = delta.sum_axis(Axis(0));
        if i > 0 {
            delta = delta.dot(&layer.weights);
        }
        layers.push(LayerGradient { weights, bias });
    }
    layers.reverse();
    Ok((mse, Gradients { layers }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub validation_fraction: f64,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: DEFAULT_SEED,
            validation_fraction: 0.0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            hidden_activation: Activation::Rectifier,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden.contains(&0) {
            return Err(Error::arg("batch size and hidden widths must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return Err(Error::arg(format!(
                "validation fraction must be in [0, 0.5], got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Training-set MSE of the initial network.
    pub initial_mse: f64,
    pub epochs: Vec<EpochLoss>,
}

fn mse(model: &MlpModel, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    let out = model.forward_batch(x)?;
    let r = out - y;
    Ok(r.dot(&r) / y.len() as f64)
}

/// Trains on a standardized dataset. The target is standardized internally
/// with population moments; losses in the history are on that scale.
pub fn train_mlp(
    dataset: &EncodedDataset,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    config.validate()?;
    let n = dataset.x.nrows();
    if dataset.y.len() != n {
        return Err(Error::arg("design matrix and target lengths differ"));
    }
    let n_val = (n as f64 * config.validation_fraction).round() as usize;
    let n_train = n - n_val;
    if n_train < config.batch_size {
        return Err(Error::arg(format!(
            "need at least one full batch of {} training rows, got {n_train}",
            config.batch_size
        )));
    }
    let mut sizes = vec![dataset.x.ncols()];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut model = init_mlp_with(&sizes, config.seed, config.hidden_activation)?;
    model.input_columns = dataset.columns.clone();

    let mean = dataset.y.mean().unwrap_or(0.0);
    let sd = dataset
        .y
        .mapv(|v| (v - mean).powi(2))
        .mean()
        .unwrap_or(0.0)
        .sqrt();
    model.target_mean = mean;
    model.target_sd = if sd > 0.0 { sd } else { 1.0 };
    let y = dataset
        .y
        .mapv(|v| (v - model.target_mean) / model.target_sd);

    // init and shuffling use separate streams so the seed controls both
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..n).collect();
    if n_val > 0 {
        order.shuffle(&mut rng);
    }
    let (train_idx, val_idx) = order.split_at(n_train);
    let x_val = dataset.x.select(Axis(0), val_idx);
    let y_val = y.select(Axis(0), val_idx);
    let x_train = dataset.x.select(Axis(0), train_idx);
    let y_train = y.select(Axis(0), train_idx);

    let mut history = TrainHistory {
        initial_mse: mse(&model, x_train.view(), y_train.view())?,
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut positions: Vec<usize> = (0..n_train).collect();
    for epoch in 1..=config.epochs {
        positions.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in positions.chunks(config.batch_size) {
            let xb = x_train.select(Axis(0), chunk);
            let yb = y_train.select(Axis(0), chunk);
            let (loss, grads) = loss_and_gradients(&model, xb.view(), yb.view())?;
            model.step(&grads, config.learning_rate);
            total += loss * chunk.len() as f64;
        }
        if !model.is_finite() || !total.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let validation_mse = if n_val > 0 {
            Some(mse(&model, x_val.view(), y_val.view())?)
        } else {
            None
        };
        history.epochs.push(EpochLoss {
            train_mse: total / n_train as f64,
            validation_mse,
        });
    }
    Ok((model, history))
}

#[derive(Serialize, Deserialize)]
struct LayerWire {
    activation: Activation,
    /// Row-major, `outputs × inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpWire {
    dimensions: Vec<usize>,
    input_columns: Vec<String>,
    target_mean: f64,
    target_sd: f64,
    layers: Vec<LayerWire>,
}

impl From<MlpModel> for MlpWire {
    fn from(m: MlpModel) -> Self {
        MlpWire {
            dimensions: m.sizes(),
            input_columns: m.input_columns,
            target_mean: m.target_mean,
            target_sd: m.target_sd,
            layers: m
                .layers
                .into_iter()
                .map(|l| LayerWire {
                    activation: l.activation,
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MlpWire> for MlpModel {
    type Error = String;

    fn try_from(w: MlpWire) -> std::result::Result<Self, String> {
        if w.dimensions.len() != w.layers.len() + 1 {
            return Err(format!(
                "{} dimensions do not describe {} layers",
                w.dimensions.len(),
                w.layers.len()
            ));
        }
        let layers = w
            .layers
            .into_iter()
            .zip(w.dimensions.windows(2))
            .map(|(l, d)| {
                let weights = Array2::from_shape_vec((d[1], d[0]), l.weights)
                    .map_err(|e| format!("weights for {}x{} layer: {e}", d[1], d[0]))?;
                if l.bias.len() != d[1] {
                    return Err(format!(
                        "bias of length {} for width {}",
                        l.bias.len(),
                        d[1]
                    ));
                }
                Ok(DenseLayer {
                    weights,
                    bias: Array1::from(l.bias),
                    activation: l.activation,
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let model = MlpModel {
            layers,
            input_columns: w.input_columns,
            target_mean: w.target_mean,
            target_sd: w.target_sd,
        };
        model.validate().map_err(|e| e.to_string())?;
        Ok(model)
    }
}

/// Slices `x` into contiguous row blocks; used by callers that evaluate
/// large matrices without holding every activation at once.
pub fn predict_in_blocks(
    model: &MlpModel,
    x: ArrayView2<f64>,
    block: usize,
) -> Result<Array1<f64>> {
    let block = block.max(1);
    let mut out = Array1::zeros(x.nrows());
    let mut start = 0;
    while start < x.nrows() {
        let end = (start + block).min(x.nrows());
        let part = model.predict_batch(x.slice(s![start..end, ..]))?;
        out.slice_mut(s![start..end]).assign(&part);
        start = end;
    }
    Ok(out)
}
