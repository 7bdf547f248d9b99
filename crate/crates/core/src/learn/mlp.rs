//! Feedforward networks trained with mini-batch backpropagation.
//!
//! Inputs are standardized per feature with statistics from the training
//! split; regression targets are standardized too and mapped back at
//! prediction time. Dropout is inverted (survivors scaled by `1/(1-p)`) and
//! applies to hidden-layer outputs during training only.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, check_finite, check_inputs, class_ids, LearnError};
use crate::linalg::Matrix;

pub const MLP_FORMAT: &str = "mlp.v1";

const EPSILON: f64 = 1e-7;
/// Features with a spread below this are centered but not scaled.
const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Elu,
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Elu => z.mapv(|v| if v > 0.0 { v } else { v.exp_m1() }),
            Activation::Sigmoid => z.mapv(sigmoid),
            Activation::Identity => z.clone(),
            Activation::Softmax => {
                let mut out = z.clone();
                for mut row in out.rows_mut() {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row /= sum;
                }
                out
            }
        }
    }

    /// Elementwise derivative at pre-activation `z`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
            Activation::Softmax => unreachable!("softmax is only paired with cross-entropy"),
        }
    }

    fn he_init(self) -> bool {
        matches!(self, Activation::Relu | Activation::Elu)
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
    #[serde(default)]
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation, dropout: f64) -> Self {
        Self { units, activation, dropout }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    CategoricalCrossEntropy,
    MeanSquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    RmsProp { lr: f64, momentum: f64, rho: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64 },
}

impl Optimizer {
    pub fn rmsprop(lr: f64, momentum: f64) -> Self {
        Optimizer::RmsProp { lr, momentum, rho: 0.9 }
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam { lr, beta1: 0.9, beta2: 0.999 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden layers followed by the output layer.
    pub layers: Vec<LayerSpec>,
    pub loss: Loss,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Trailing fraction of the training rows held out for validation metrics.
    #[serde(default)]
    pub validation_split: f64,
}

impl MlpConfig {
    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.units)
    }

    pub fn is_classifier(&self) -> bool {
        self.loss == Loss::CategoricalCrossEntropy
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |msg: String| Err(LearnError::InvalidConfig(msg));
        let Some(out) = self.layers.last() else {
            return bad("a network needs an output layer".into());
        };
        if self.layers.iter().any(|l| l.units == 0) {
            return bad("layers need at least one unit".into());
        }
        if let Some(l) = self.layers.iter().find(|l| !(0.0..1.0).contains(&l.dropout)) {
            return bad(format!("dropout {} outside [0, 1)", l.dropout));
        }
        if out.dropout != 0.0 {
            return bad("the output layer takes no dropout".into());
        }
        let hidden = &self.layers[..self.layers.len() - 1];
        if hidden.iter().any(|l| l.activation == Activation::Softmax) {
            return bad("softmax is only allowed on the output layer".into());
        }
        match self.loss {
            Loss::CategoricalCrossEntropy if out.activation != Activation::Softmax || out.units < 2 => {
                bad("cross-entropy needs a softmax output with at least two units".into())
            }
            Loss::MeanSquaredError if out.activation == Activation::Softmax => {
                bad("mean squared error needs a non-softmax output".into())
            }
            _ if self.batch_size == 0 => bad("batch_size must be positive".into()),
            _ if !(0.0..1.0).contains(&self.validation_split) => bad("validation_split must lie in [0, 1)".into()),
            _ => Ok(()),
        }
    }
}

/// Per-feature affine map `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(n: usize) -> Self {
        Self { mean: vec![0.0; n], scale: vec![1.0; n] }
    }

    pub fn fit(x: ArrayView2<f64>) -> Self {
        let rows = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / rows;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / rows;
            mean.push(m);
            scale.push(if var.sqrt() > MIN_SCALE { var.sqrt() } else { 1.0 });
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &mut Array2<f64>) {
        for mut row in x.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `inputs x units`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub format: String,
    pub config: MlpConfig,
    pub schema_id: Option<String>,
    pub num_features: usize,
    pub input: Standardizer,
    /// Regression target standardization (mean, scale).
    pub target: Option<(f64, f64)>,
    pub layers: Vec<DenseLayer>,
    pub history: Vec<EpochStats>,
}

struct Pass {
    /// `outputs[0]` is the input batch; `outputs[l + 1]` the (dropped-out) output of layer `l`.
    outputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
}

pub type Gradients = Vec<(Array2<f64>, Array1<f64>)>;

impl MlpModel {
    /// Fresh network with seeded uniform fan-scaled weights and zero biases.
    pub fn init(cfg: &MlpConfig, num_features: usize) -> Result<Self, LearnError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self::init_with(cfg, num_features, &mut rng))
    }

    fn init_with(cfg: &MlpConfig, num_features: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut fan_in = num_features;
        let layers = cfg
            .layers
            .iter()
            .map(|spec| {
                let limit = if spec.activation.he_init() {
                    (6.0 / fan_in as f64).sqrt()
                } else {
                    (6.0 / (fan_in + spec.units) as f64).sqrt()
                };
                let w = Array2::from_shape_simple_fn((fan_in, spec.units), || rng.random_range(-limit..limit));
                fan_in = spec.units;
                DenseLayer { w, b: Array1::zeros(spec.units), activation: spec.activation, dropout: spec.dropout }
            })
            .collect();
        Self {
            format: MLP_FORMAT.to_string(),
            config: cfg.clone(),
            schema_id: None,
            num_features,
            input: Standardizer::identity(num_features),
            target: None,
            layers,
            history: Vec::new(),
        }
    }

    pub fn with_schema(mut self, schema_id: impl Into<String>) -> Self {
        self.schema_id = Some(schema_id.into());
        self
    }

    fn forward(&self, x: Array2<f64>, mut dropout_rng: Option<&mut ChaCha8Rng>) -> Pass {
        let last = self.layers.len() - 1;
        let mut pass = Pass { outputs: vec![x], pre: Vec::new(), masks: Vec::new() };
        for (l, layer) in self.layers.iter().enumerate() {
            let z = pass.outputs[l].dot(&layer.w) + &layer.b;
            let mut a = layer.activation.apply(&z);
            let mut mask = None;
            if let Some(rng) = dropout_rng.as_deref_mut() {
                if l < last && layer.dropout > 0.0 {
                    let keep = 1.0 - layer.dropout;
                    let m = Array2::from_shape_simple_fn(a.raw_dim(), || {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    a *= &m;
                    mask = Some(m);
                }
            }
            pass.pre.push(z);
            pass.outputs.push(a);
            pass.masks.push(mask);
        }
        pass
    }

    /// Mean batch loss from the final layer.
    fn batch_loss(&self, pass: &Pass, targets: &Array2<f64>) -> f64 {
        let rows = targets.nrows() as f64;
        match self.config.loss {
            Loss::CategoricalCrossEntropy => {
                let logits = pass.pre.last().unwrap();
                let mut total = 0.0;
                for (z, t) in logits.rows().into_iter().zip(targets.rows()) {
                    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    total += z.iter().zip(t).map(|(zi, ti)| ti * (lse - zi)).sum::<f64>();
                }
                total / rows
            }
            Loss::MeanSquaredError => {
                let out = pass.outputs.last().unwrap();
                (out - targets).mapv(|d| d * d).sum() / (rows * targets.ncols() as f64)
            }
        }
    }

    fn backward(&self, pass: &Pass, targets: &Array2<f64>) -> Gradients {
        let rows = targets.nrows() as f64;
        let last = self.layers.len() - 1;
        let out = &pass.outputs[last + 1];
        let mut delta = match self.config.loss {
            Loss::CategoricalCrossEntropy => (out - targets) / rows,
            Loss::MeanSquaredError => {
                let scale = 2.0 / (rows * targets.ncols() as f64);
                let act = self.layers[last].activation;
                let mut d = (out - targets) * scale;
                Zip::from(&mut d).and(&pass.pre[last]).for_each(|d, &z| *d *= act.derivative(z));
                d
            }
        };
        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..=last).rev() {
            let gw = pass.outputs[l].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut da = delta.dot(&self.layers[l].w.t());
                if let Some(mask) = &pass.masks[l - 1] {
                    da *= mask;
                }
                let act = self.layers[l - 1].activation;
                Zip::from(&mut da).and(&pass.pre[l - 1]).for_each(|d, &z| *d *= act.derivative(z));
                delta = da;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        grads
    }

    fn targets(&self, y: &[f64]) -> Result<Array2<f64>, LearnError> {
        let k = self.config.outputs();
        if self.config.is_classifier() {
            let ids = class_ids(y, k)?;
            let mut t = Array2::zeros((y.len(), k));
            for (i, c) in ids.into_iter().enumerate() {
                t[(i, c)] = 1.0;
            }
            Ok(t)
        } else {
            let (mean, scale) = self.target.unwrap_or((0.0, 1.0));
            Ok(Array2::from_shape_fn((y.len(), k), |(i, _)| (y[i] - mean) / scale))
        }
    }

    fn inputs(&self, x: &Matrix) -> Result<Array2<f64>, LearnError> {
        if x.cols() != self.num_features {
            return Err(LearnError::FeatureCount { expected: self.num_features, found: x.cols() });
        }
        check_finite(x)?;
        let mut a = Array2::from_shape_vec((x.rows(), x.cols()), x.as_slice().to_vec())
            .expect("matrix shape matches its data");
        self.input.apply(&mut a);
        Ok(a)
    }

    /// Mean loss and its exact gradient per layer `(dW, db)` on raw inputs,
    /// with dropout off.
    pub fn loss_and_gradients(&self, x: &Matrix, y: &[f64]) -> Result<(f64, Gradients), LearnError> {
        let input = self.inputs(x)?;
        let targets = self.targets(y)?;
        let pass = self.forward(input, None);
        Ok((self.batch_loss(&pass, &targets), self.backward(&pass, &targets)))
    }

    /// Mean loss and accuracy (classification only) with dropout off.
    pub fn evaluate(&self, x: &Matrix, y: &[f64]) -> Result<(f64, Option<f64>), LearnError> {
        let input = self.inputs(x)?;
        let targets = self.targets(y)?;
        Ok(self.metrics(input, &targets))
    }

    fn metrics(&self, input: Array2<f64>, targets: &Array2<f64>) -> (f64, Option<f64>) {
        let pass = self.forward(input, None);
        let loss = self.batch_loss(&pass, targets);
        let acc = self.config.is_classifier().then(|| accuracy(pass.outputs.last().unwrap(), targets));
        (loss, acc)
    }
}

fn accuracy(probs: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let hits = probs
        .rows()
        .into_iter()
        .zip(targets.rows())
        .filter(|(p, t)| argmax(p.as_slice().unwrap()) == argmax(t.as_slice().unwrap()))
        .count();
    hits as f64 / probs.nrows().max(1) as f64
}

struct OptState {
    step: i32,
    first: Vec<(Array2<f64>, Array1<f64>)>,
    second: Vec<(Array2<f64>, Array1<f64>)>,
}

impl OptState {
    fn new(layers: &[DenseLayer]) -> Self {
        let zeros = || layers.iter().map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.len()))).collect();
        Self { step: 0, first: zeros(), second: zeros() }
    }

    fn apply(&mut self, opt: Optimizer, layers: &mut [DenseLayer], grads: &Gradients) {
        self.step += 1;
        for (l, layer) in layers.iter_mut().enumerate() {
            let (m_w, m_b) = &mut self.first[l];
            let (v_w, v_b) = &mut self.second[l];
            let (g_w, g_b) = &grads[l];
            match opt {
                Optimizer::RmsProp { lr, momentum, rho } => {
                    let update = |w: &mut f64, mom: &mut f64, ms: &mut f64, g: f64| {
                        *ms = rho * *ms + (1.0 - rho) * g * g;
                        *mom = momentum * *mom + lr * g / (*ms + EPSILON).sqrt();
                        *w -= *mom;
                    };
                    Zip::from(&mut layer.w).and(m_w).and(v_w).and(g_w).for_each(|w, m, v, &g| update(w, m, v, g));
                    Zip::from(&mut layer.b).and(m_b).and(v_b).and(g_b).for_each(|w, m, v, &g| update(w, m, v, g));
                }
                Optimizer::Adam { lr, beta1, beta2 } => {
                    let alpha = lr * (1.0 - beta2.powi(self.step)).sqrt() / (1.0 - beta1.powi(self.step));
                    let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= alpha * *m / (v.sqrt() + EPSILON);
                    };
                    Zip::from(&mut layer.w).and(m_w).and(v_w).and(g_w).for_each(|w, m, v, &g| update(w, m, v, g));
                    Zip::from(&mut layer.b).and(m_b).and(v_b).and(g_b).for_each(|w, m, v, &g| update(w, m, v, g));
                }
            }
        }
    }
}

/// Trains a network. Classification labels are class ids stored as `f64`.
pub fn mlp_train(cfg: &MlpConfig, x: &Matrix, y: &[f64]) -> Result<MlpModel, LearnError> {
    cfg.validate()?;
    check_inputs(x, y, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init_with(cfg, x.cols(), &mut rng);

    let n = x.rows();
    let n_val = if n >= 10 { (n as f64 * cfg.validation_split).floor() as usize } else { 0 };
    let n_train = n - n_val;
    let all = Array2::from_shape_vec((n, x.cols()), x.as_slice().to_vec()).expect("matrix shape matches its data");
    model.input = Standardizer::fit(all.slice(s![..n_train, ..]));
    if !cfg.is_classifier() {
        let t = &y[..n_train];
        let mean = t.iter().sum::<f64>() / n_train as f64;
        let sd = (t.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_train as f64).sqrt();
        model.target = Some((mean, if sd > MIN_SCALE { sd } else { 1.0 }));
    }
    let mut inputs = all;
    model.input.apply(&mut inputs);
    let targets = model.targets(y)?;
    let (train_x, val_x) = inputs.view().split_at(Axis(0), n_train);
    let (train_t, val_t) = targets.view().split_at(Axis(0), n_train);

    let batch = cfg.batch_size.min(n_train);
    let mut opt = OptState::new(&model.layers);
    let mut order: Vec<usize> = (0..n_train).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0.0);
        for (b, chunk) in order.chunks(batch).enumerate() {
            let xb = train_x.select(Axis(0), chunk);
            let tb = train_t.select(Axis(0), chunk);
            let pass = model.forward(xb, Some(&mut rng));
            let loss = model.batch_loss(&pass, &tb);
            if !loss.is_finite() {
                return Err(LearnError::NonFiniteLoss { epoch, batch: b, loss });
            }
            loss_sum += loss * chunk.len() as f64;
            if cfg.is_classifier() {
                hits += accuracy(pass.outputs.last().unwrap(), &tb) * chunk.len() as f64;
            }
            let grads = model.backward(&pass, &tb);
            opt.apply(cfg.optimizer, &mut model.layers, &grads);
        }
        let (val_loss, val_accuracy) = if n_val > 0 {
            let (l, a) = model.metrics(val_x.to_owned(), &val_t.to_owned());
            (Some(l), a)
        } else {
            (None, None)
        };
        model.history.push(EpochStats {
            epoch,
            loss: loss_sum / n_train as f64,
            accuracy: cfg.is_classifier().then_some(hits / n_train as f64),
            val_loss,
            val_accuracy,
        });
    }
    Ok(model)
}

/// Class probabilities (one column per class) or regression values (one column).
pub fn mlp_predict(model: &MlpModel, x: &Matrix) -> Result<Matrix, LearnError> {
    let input = model.inputs(x)?;
    let pass = model.forward(input, None);
    let mut out = pass.outputs.into_iter().last().unwrap();
    if let Some((mean, scale)) = model.target {
        out.mapv_inplace(|v| v * scale + mean);
    }
    let (rows, cols) = out.dim();
    Ok(Matrix::from_vec(rows, cols, out.into_iter().collect()).expect("output shape matches its data"))
}
