//! Dense feedforward autoencoder, reconstruction errors and the hand-wired
//! "perfect" linear models used as explanation ground truth.

use std::cmp::Ordering;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{rng_from_seed, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MODEL_SCHEMA: &str = "aex.model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output<T: Scalar>(self, a: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => a * (T::one() - a),
        }
    }
}

/// One dense layer. `weights` is `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn forward_batch(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        let act = self.activation;
        if act != Activation::Identity {
            z.mapv_inplace(|v| act.apply(v));
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_sizes: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Activation of the reconstruction layer. Hidden layers use ReLU.
    pub output_activation: Activation,
    /// L2 penalty on weights (not biases), applied as a per-step shrink.
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![4, 2, 4],
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 0,
            output_activation: Activation::Identity,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer sizes must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.learning_rate * self.weight_decay < 1.0) {
            return Err(Error::InvalidArgument(
                "weight decay must be non-negative and below 1 / learning rate".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean squared reconstruction error (averaged over rows and features)
    /// for each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// Gradients of one layer, same shapes as the layer.
#[derive(Debug, Clone)]
pub struct LayerGrad<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Autoencoder<T> {
    /// Validates that layer widths chain and that input and output widths
    /// agree.
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("autoencoder needs at least one layer".into()))?;
        let n = first.inputs();
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::InvalidArgument(format!(
                    "layer {i}: bias length {} for {} outputs",
                    l.bias.len(),
                    l.outputs()
                )));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} expects {} inputs but previous layer emits {}",
                    l.inputs(),
                    layers[i - 1].outputs()
                )));
            }
        }
        let out = layers.last().map(Layer::outputs).unwrap_or(n);
        if out != n {
            return Err(Error::InvalidArgument(format!(
                "reconstruction width {out} differs from input width {n}"
            )));
        }
        Ok(Self { layers })
    }

    /// Randomly initialised network `n -> hidden... -> n`. ReLU layers use
    /// He-uniform initialisation, the output layer Glorot-uniform scaled by 0.1.
    pub fn build(n_features: usize, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if n_features == 0 {
            return Err(Error::InvalidArgument("autoencoder needs at least one feature".into()));
        }
        let mut widths = Vec::with_capacity(cfg.hidden_sizes.len() + 2);
        widths.push(n_features);
        widths.extend_from_slice(&cfg.hidden_sizes);
        widths.push(n_features);
        let mut rng = rng_from_seed(cfg.seed);
        let n_layers = widths.len() - 1;
        let layers = (0..n_layers)
            .map(|l| {
                let (fan_in, fan_out) = (widths[l], widths[l + 1]);
                let is_output = l + 1 == n_layers;
                let limit = if is_output {
                    // a small output layer keeps the first updates from
                    // pushing hidden ReLUs into the all-negative region
                    0.1 * (6.0 / (fan_in + fan_out) as f64).sqrt()
                } else {
                    (6.0 / fan_in as f64).sqrt()
                };
                let weights = Array2::from_shape_fn((fan_out, fan_in), |_| T::lit(rng.random_range(-limit..limit)));
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation: if is_output {
                        cfg.output_activation
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Layer widths from input to reconstruction.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.n_features())
            .chain(self.layers.iter().map(Layer::outputs))
            .collect()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_features() {
            return Err(Error::WidthMismatch {
                expected: self.n_features(),
                actual: width,
            });
        }
        Ok(())
    }

    /// Reconstructs every row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_width(x.ncols())?;
        let mut a = self.layers[0].forward_batch(x);
        for layer in &self.layers[1..] {
            a = layer.forward_batch(a.view());
        }
        Ok(a)
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// The `i`th reconstructed feature: the scalar function handed to the
    /// attribution engine.
    pub fn predict_feature(&self, x: &[T], i: usize) -> Result<T> {
        if i >= self.n_features() {
            return Err(Error::InvalidIndex {
                index: i,
                len: self.n_features(),
            });
        }
        Ok(self.forward(x)?[i])
    }

    /// `sum_i (x_i - x'_i)^2`.
    pub fn anomaly_score(&self, x: &[T]) -> Result<T> {
        let x_hat = self.forward(x)?;
        Ok(squared_error(x, &x_hat))
    }

    /// Scores for every row of `x`.
    pub fn anomaly_scores(&self, x: ArrayView2<'_, T>) -> Result<Vec<T>> {
        let x_hat = self.forward_batch(x)?;
        Ok(x.rows()
            .into_iter()
            .zip(x_hat.rows())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(&u, &v)| (u - v) * (u - v)).sum())
            .collect())
    }

    pub fn errors(&self, x: &[T]) -> Result<ErrorList<T>> {
        let x_hat = self.forward(x)?;
        per_feature_errors(x, &x_hat)
    }

    /// Mean squared reconstruction error of the batch (mean over rows and
    /// features) and its gradients with respect to every parameter.
    pub fn loss_and_gradients(&self, x: ArrayView2<'_, T>) -> Result<(T, Vec<LayerGrad<T>>)> {
        self.check_width(x.ncols())?;
        let mut acts: Vec<Array2<T>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for layer in &self.layers {
            let next = layer.forward_batch(acts.last().expect("non-empty").view());
            acts.push(next);
        }
        let out = acts.last().expect("non-empty");
        let count = T::from_usize_lossy(x.len().max(1));
        let diff = out - &x;
        let loss = diff.iter().map(|&d| d * d).sum::<T>() / count;

        let mut upstream = diff.mapv(|d| d * T::lit(2.0) / count);
        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            let mut delta = upstream;
            if act != Activation::Identity {
                delta.zip_mut_with(&acts[l + 1], |d, &a| *d *= act.derivative_from_output(a));
            }
            let gw = delta.t().dot(&acts[l]);
            let gb = delta.sum_axis(Axis(0));
            upstream = delta.dot(&layer.weights);
            grads.push(LayerGrad { weights: gw, bias: gb });
        }
        grads.reverse();
        Ok((loss, grads))
    }

    /// Mini-batch gradient descent on mean squared reconstruction error.
    pub fn train(&mut self, d: &Dataset<T>, cfg: &TrainConfig) -> Result<TrainReport> {
        cfg.validate()?;
        self.check_width(d.n_features())?;
        let n = d.n_rows();
        let mut report = TrainReport {
            epoch_losses: Vec::with_capacity(cfg.epochs),
        };
        if n == 0 {
            return Ok(report);
        }
        let lr = T::lit(cfg.learning_rate);
        let shrink = T::lit(1.0 - cfg.learning_rate * cfg.weight_decay);
        let mut rng = rng_from_seed(cfg.seed ^ 0x7472_6169_6e00_0000);
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0f64;
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let batch = d.rows().select(Axis(0), chunk);
                let (loss, grads) = self.loss_and_gradients(batch.view())?;
                let loss = loss.as_f64();
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b });
                }
                total += loss * chunk.len() as f64;
                for (layer, g) in self.layers.iter_mut().zip(grads) {
                    if cfg.weight_decay > 0.0 {
                        layer.weights *= shrink;
                    }
                    layer.weights.scaled_add(-lr, &g.weights);
                    layer.bias.scaled_add(-lr, &g.bias);
                }
            }
            report.epoch_losses.push(total / n as f64);
        }
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDoc::from_model(self, None))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDoc<T> = serde_json::from_str(s)?;
        doc.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>, norm_stats: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let doc = ModelDoc::from_model(self, norm_stats.map(str::to_string));
        let text = serde_json::to_string_pretty(&doc)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Loads a model document, returning the model and its optional
    /// normalisation sidecar reference.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<String>)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ModelDoc<T> = serde_json::from_str(&text)?;
        let stats = doc.norm_stats.clone();
        Ok((doc.into_model()?, stats))
    }
}

pub fn squared_error<T: Scalar>(x: &[T], x_hat: &[T]) -> T {
    x.iter().zip(x_hat).map(|(&a, &b)| (a - b) * (a - b)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ErrorEntry<T> {
    pub feature: usize,
    /// `x_i - x'_i`
    pub signed: T,
    pub abs: T,
}

/// Per-feature reconstruction errors, largest absolute error first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ErrorList<T> {
    pub entries: Vec<ErrorEntry<T>>,
    /// `L(X, X') = sum of squared errors`
    pub total: T,
}

/// Sorts by absolute error descending; equal errors keep ascending feature
/// order.
pub fn per_feature_errors<T: Scalar>(x: &[T], x_hat: &[T]) -> Result<ErrorList<T>> {
    if x.len() != x_hat.len() {
        return Err(Error::WidthMismatch {
            expected: x.len(),
            actual: x_hat.len(),
        });
    }
    let mut entries: Vec<ErrorEntry<T>> = x
        .iter()
        .zip(x_hat)
        .enumerate()
        .map(|(feature, (&a, &b))| ErrorEntry {
            feature,
            signed: a - b,
            abs: (a - b).abs(),
        })
        .collect();
    entries.sort_by(|a, b| {
        b.abs
            .partial_cmp(&a.abs)
            .unwrap_or(Ordering::Equal)
            .then(a.feature.cmp(&b.feature))
    });
    Ok(ErrorList {
        entries,
        total: squared_error(x, x_hat),
    })
}

/// Which of the three hand-wired linear models to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerfectModel {
    /// X5 = X1 + X2, X6 = X3 + X4
    Model1,
    /// X2 = X5 - X1, X4 = X6 - X3
    Model2,
    /// X1 = X5 - X2, X3 = X6 - X4
    Model3,
}

impl PerfectModel {
    pub const ALL: [PerfectModel; 3] = [PerfectModel::Model1, PerfectModel::Model2, PerfectModel::Model3];

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(PerfectModel::Model1),
            2 => Ok(PerfectModel::Model2),
            3 => Ok(PerfectModel::Model3),
            _ => Err(Error::InvalidArgument(format!(
                "perfect model id {id} is not 1, 2 or 3"
            ))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            PerfectModel::Model1 => 1,
            PerfectModel::Model2 => 2,
            PerfectModel::Model3 => 3,
        }
    }

    /// Zero-based independent features, in inner-neuron order.
    pub fn independent(self) -> [usize; 4] {
        match self {
            PerfectModel::Model1 => [0, 1, 2, 3],
            PerfectModel::Model2 => [0, 2, 4, 5],
            PerfectModel::Model3 => [1, 3, 4, 5],
        }
    }

    /// `(dependent output, [(independent input, sign)])` for both relations.
    pub fn relations(self) -> [(usize, [(usize, f64); 2]); 2] {
        match self {
            PerfectModel::Model1 => [(4, [(0, 1.0), (1, 1.0)]), (5, [(2, 1.0), (3, 1.0)])],
            PerfectModel::Model2 => [(1, [(4, 1.0), (0, -1.0)]), (3, [(5, 1.0), (2, -1.0)])],
            PerfectModel::Model3 => [(0, [(4, 1.0), (1, -1.0)]), (2, [(5, 1.0), (3, -1.0)])],
        }
    }

    /// Output that absorbs the error when the given sum feature (X5 = 4 or
    /// X6 = 5) is corrupted.
    pub fn dependent_for(self, anomaly_feature: usize) -> Option<usize> {
        let group = match anomaly_feature {
            4 => 0,
            5 => 1,
            _ => return None,
        };
        Some(self.relations()[group].0)
    }
}

/// 6 -> 4 -> 6 linear network whose weights (in {-1, 0, 1}) encode one of
/// the three rewritings of `X5 = X1 + X2`, `X6 = X3 + X4`. Inner neuron `k`
/// copies the `k`th independent input.
pub fn perfect_linear_ae<T: Scalar>(model: PerfectModel) -> Autoencoder<T> {
    let indep = model.independent();
    let mut enc = Array2::<T>::zeros((4, 6));
    for (k, &f) in indep.iter().enumerate() {
        enc[[k, f]] = T::one();
    }
    let mut dec = Array2::<T>::zeros((6, 4));
    for (k, &f) in indep.iter().enumerate() {
        dec[[f, k]] = T::one();
    }
    for (dep, terms) in model.relations() {
        for (src, sign) in terms {
            let k = indep.iter().position(|&f| f == src).expect("source is independent");
            dec[[dep, k]] = T::lit(sign);
        }
    }
    Autoencoder::from_layers(vec![
        Layer {
            weights: enc,
            bias: Array1::zeros(4),
            activation: Activation::Identity,
        },
        Layer {
            weights: dec,
            bias: Array1::zeros(6),
            activation: Activation::Identity,
        },
    ])
    .expect("fixed architecture chains")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct LayerDoc<T> {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    /// Row-major `outputs x inputs`.
    weights: Vec<T>,
    bias: Vec<T>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelDoc<T> {
    schema: String,
    version: u32,
    n_features: usize,
    layers: Vec<LayerDoc<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    norm_stats: Option<String>,
}

impl<T: Scalar> ModelDoc<T> {
    fn from_model(m: &Autoencoder<T>, norm_stats: Option<String>) -> Self {
        Self {
            schema: MODEL_SCHEMA.to_string(),
            version: MODEL_VERSION,
            n_features: m.n_features(),
            layers: m
                .layers
                .iter()
                .map(|l| LayerDoc {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation,
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            norm_stats,
        }
    }

    fn into_model(self) -> Result<Autoencoder<T>> {
        if self.schema != MODEL_SCHEMA || self.version != MODEL_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model document {} v{}",
                self.schema, self.version
            )));
        }
        let layers = self
            .layers
            .into_iter()
            .map(|l| {
                let weights = Array2::from_shape_vec((l.outputs, l.inputs), l.weights)
                    .map_err(|e| Error::InvalidArgument(format!("layer weights: {e}")))?;
                Ok(Layer {
                    weights,
                    bias: Array1::from(l.bias),
                    activation: l.activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = Autoencoder::from_layers(layers)?;
        if m.n_features() != self.n_features {
            return Err(Error::WidthMismatch {
                expected: self.n_features,
                actual: m.n_features(),
            });
        }
        Ok(m)
    }
}
