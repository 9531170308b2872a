//! Dense feed-forward network with reverse-mode parameter gradients, a
//! finite-difference input Laplacian and a full-batch Adam trainer.
//!
//! The network maps normalized coordinates `(x, y)` to a standardized output
//! `u`; predictions in dBm are `z_mean + z_std * u`. Hidden layers use
//! `tanh`, the output layer is linear.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geostat::Sample2D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("empty training set")]
    EmptyBatch,
}

/// Default architecture: five weight-bearing layers, hidden width 64.
pub const DEFAULT_LAYER_DIMS: [usize; 6] = [2, 64, 64, 64, 64, 1];

/// Multi-layer perceptron parameters plus output standardization.
///
/// Parameters are stored flat: for each layer, the `out x in` row-major
/// weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpParams", into = "MlpParams")]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    params: Vec<f64>,
    pub z_mean: f64,
    pub z_std: f64,
    /// Number of optimizer steps applied; zero for a freshly initialized model.
    pub epochs_trained: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerParams {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MlpParams {
    layer_dims: Vec<usize>,
    layers: Vec<LayerParams>,
    z_mean: f64,
    z_std: f64,
    epochs_trained: usize,
}

impl From<MlpModel> for MlpParams {
    fn from(m: MlpModel) -> Self {
        let layers = (0..m.n_layers())
            .map(|l| LayerParams {
                weights: m.weights(l).rows().into_iter().map(|r| r.to_vec()).collect(),
                biases: m.biases(l).to_vec(),
            })
            .collect();
        Self {
            layer_dims: m.layer_dims,
            layers,
            z_mean: m.z_mean,
            z_std: m.z_std,
            epochs_trained: m.epochs_trained,
        }
    }
}

impl TryFrom<MlpParams> for MlpModel {
    type Error = NeuralError;

    fn try_from(p: MlpParams) -> Result<Self, Self::Error> {
        validate_dims(&p.layer_dims)?;
        if p.layers.len() != p.layer_dims.len() - 1 {
            return Err(NeuralError::Config(format!(
                "{} layers for dims {:?}",
                p.layers.len(),
                p.layer_dims
            )));
        }
        let mut params = Vec::with_capacity(param_count(&p.layer_dims));
        for (l, layer) in p.layers.iter().enumerate() {
            let (fan_in, fan_out) = (p.layer_dims[l], p.layer_dims[l + 1]);
            if layer.weights.len() != fan_out
                || layer.weights.iter().any(|r| r.len() != fan_in)
                || layer.biases.len() != fan_out
            {
                return Err(NeuralError::Config(format!("layer {l} shape mismatch")));
            }
            layer.weights.iter().for_each(|r| params.extend_from_slice(r));
            params.extend_from_slice(&layer.biases);
        }
        if !(p.z_std.is_finite() && p.z_std > 0.0) || !p.z_mean.is_finite() {
            return Err(NeuralError::Config(format!("bad standardization ({}, {})", p.z_mean, p.z_std)));
        }
        Ok(Self {
            layer_dims: p.layer_dims,
            params,
            z_mean: p.z_mean,
            z_std: p.z_std,
            epochs_trained: p.epochs_trained,
        })
    }
}

fn validate_dims(dims: &[usize]) -> Result<(), NeuralError> {
    if dims.len() < 2 || dims[0] != 2 || *dims.last().unwrap() != 1 || dims.contains(&0) {
        return Err(NeuralError::Config(format!(
            "layer dims {dims:?} must start with 2, end with 1, and have no zero widths"
        )));
    }
    Ok(())
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

/// Returns `(weights offset, biases offset)` of layer `l`.
fn layer_offsets(dims: &[usize], l: usize) -> (usize, usize) {
    let start: usize = dims.windows(2).take(l).map(|w| w[1] * (w[0] + 1)).sum();
    (start, start + dims[l] * dims[l + 1])
}

/// Initializes weights from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` drawn from a
/// ChaCha8 stream seeded with `seed`; biases start at zero.
pub fn init_model(layer_dims: &[usize], seed: u64) -> Result<MlpModel, NeuralError> {
    init_model_scaled(layer_dims, seed, 1.0)
}

/// [`init_model`] with the uniform half-width multiplied by `init_scale`.
pub fn init_model_scaled(layer_dims: &[usize], seed: u64, init_scale: f64) -> Result<MlpModel, NeuralError> {
    validate_dims(layer_dims)?;
    if !(init_scale.is_finite() && init_scale >= 0.0) {
        return Err(NeuralError::Config(format!("init_scale = {init_scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(param_count(layer_dims));
    for w in layer_dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = init_scale / (fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            params.push(if bound > 0.0 { rng.random_range(-bound..bound) } else { 0.0 });
        }
        params.extend(std::iter::repeat_n(0.0, fan_out));
    }
    Ok(MlpModel {
        layer_dims: layer_dims.to_vec(),
        params,
        z_mean: 0.0,
        z_std: 1.0,
        epochs_trained: 0,
    })
}

/// Intermediate activations of a batched forward pass; `acts[0]` is the input.
struct Activations {
    acts: Vec<Array2<f64>>,
}

impl MlpModel {
    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Number of weight-bearing layers.
    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self, l: usize) -> ArrayView2<'_, f64> {
        let (w, b) = layer_offsets(&self.layer_dims, l);
        ArrayView2::from_shape((self.layer_dims[l + 1], self.layer_dims[l]), &self.params[w..b])
            .expect("layout")
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let (_, b) = layer_offsets(&self.layer_dims, l);
        &self.params[b..b + self.layer_dims[l + 1]]
    }

    fn forward_acts(&self, points: &[(f64, f64)]) -> Activations {
        let input = Array2::from_shape_fn((points.len(), 2), |(i, j)| if j == 0 { points[i].0 } else { points[i].1 });
        let mut acts = Vec::with_capacity(self.layer_dims.len());
        acts.push(input);
        for l in 0..self.n_layers() {
            let prev = acts.last().unwrap();
            let mut z = prev.dot(&self.weights(l).t());
            z += &ArrayView2::from_shape((1, self.layer_dims[l + 1]), self.biases(l)).unwrap();
            if l + 1 < self.n_layers() {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        Activations { acts }
    }

    /// Standardized outputs `u` at each point.
    pub fn forward_std_batch(&self, points: &[(f64, f64)]) -> Vec<f64> {
        if points.is_empty() {
            return Vec::new();
        }
        self.forward_acts(points).acts.pop().unwrap().into_raw_vec_and_offset().0
    }

    pub fn forward_std(&self, x: f64, y: f64) -> f64 {
        self.forward_std_batch(&[(x, y)])[0]
    }

    /// Predicted power in dBm.
    pub fn predict(&self, x: f64, y: f64) -> f64 {
        self.z_mean + self.z_std * self.forward_std(x, y)
    }

    pub fn predict_batch(&self, points: &[(f64, f64)]) -> Vec<f64> {
        self.forward_std_batch(points)
            .into_iter()
            .map(|u| self.z_mean + self.z_std * u)
            .collect()
    }

    pub fn standardize(&self, z: f64) -> f64 {
        (z - self.z_mean) / self.z_std
    }
}

/// Predicted power in dBm at `(x, y)`.
pub fn forward(model: &MlpModel, x: f64, y: f64) -> f64 {
    model.predict(x, y)
}

/// Reverse-mode gradient of a loss that depends on the network only through
/// its standardized outputs at `points`; `output_grads[i]` is `dL/du_i`.
/// The result has the flat parameter layout of the model.
pub fn backprop(model: &MlpModel, points: &[(f64, f64)], output_grads: &[f64]) -> Vec<f64> {
    assert_eq!(points.len(), output_grads.len());
    forward_backward(model, points, |_| output_grads.to_vec()).1
}

/// One forward pass at `points`, then backpropagation of the output
/// gradients that `seed` derives from the standardized outputs.
pub(crate) fn forward_backward(
    model: &MlpModel,
    points: &[(f64, f64)],
    seed: impl FnOnce(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let mut grad = vec![0.0; model.n_params()];
    if points.is_empty() {
        return (Vec::new(), grad);
    }
    let Activations { acts } = model.forward_acts(points);
    let outputs: Vec<f64> = acts.last().unwrap().iter().copied().collect();
    let seeds = seed(&outputs);
    let mut delta = Array2::from_shape_vec((points.len(), 1), seeds).unwrap();
    for l in (0..model.n_layers()).rev() {
        let (w_off, b_off) = layer_offsets(&model.layer_dims, l);
        let gw = delta.t().dot(&acts[l]);
        let gb: Array1<f64> = delta.sum_axis(Axis(0));
        grad[w_off..b_off]
            .iter_mut()
            .zip(gw.iter())
            .for_each(|(g, v)| *g += v);
        grad[b_off..b_off + gb.len()]
            .iter_mut()
            .zip(gb.iter())
            .for_each(|(g, v)| *g += v);
        if l > 0 {
            let mut d_prev = delta.dot(&model.weights(l));
            d_prev.zip_mut_with(&acts[l], |d, &a| *d *= 1.0 - a * a);
            delta = d_prev;
        }
    }
    (outputs, grad)
}

fn sample_points(batch: &[Sample2D]) -> Vec<(f64, f64)> {
    batch.iter().map(|s| (s.x, s.y)).collect()
}

/// Mean squared error in standardized units, `mean((u_i - (z_i - z_mean)/z_std)^2)`.
pub fn data_loss(model: &MlpModel, batch: &[Sample2D]) -> f64 {
    let u = model.forward_std_batch(&sample_points(batch));
    let sum = u
        .iter()
        .zip(batch)
        .fold(0.0, |acc, (u, s)| acc + (u - model.standardize(s.z)).powi(2));
    sum / batch.len() as f64
}

/// Data loss together with its parameter gradient.
fn data_loss_and_grad(model: &MlpModel, batch: &[Sample2D]) -> (f64, Vec<f64>) {
    let n = batch.len() as f64;
    let mut sum = 0.0;
    let (_, grad) = forward_backward(model, &sample_points(batch), |u| {
        u.iter()
            .zip(batch)
            .map(|(u, s)| {
                let r = u - model.standardize(s.z);
                sum += r * r;
                2.0 * r / n
            })
            .collect()
    });
    (sum / n, grad)
}

/// Gradient of [`data_loss`] with respect to every parameter, flat layout.
pub fn param_gradients(model: &MlpModel, batch: &[Sample2D]) -> Result<Vec<f64>, NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    Ok(data_loss_and_grad(model, batch).1)
}

/// Offsets of the five-point stencil, with weights in units of `1/h^2`.
pub(crate) const STENCIL: [(f64, f64, f64); 5] = [
    (0.0, 0.0, -4.0),
    (1.0, 0.0, 1.0),
    (-1.0, 0.0, 1.0),
    (0.0, 1.0, 1.0),
    (0.0, -1.0, 1.0),
];

/// Five-point finite-difference Laplacian of the standardized output.
pub fn input_laplacian(model: &MlpModel, x: f64, y: f64, h: f64) -> f64 {
    laplacian_batch(model, &[(x, y)], h)[0]
}

pub(crate) fn stencil_points(points: &[(f64, f64)], h: f64) -> Vec<(f64, f64)> {
    points
        .iter()
        .flat_map(|&(x, y)| STENCIL.iter().map(move |&(dx, dy, _)| (x + dx * h, y + dy * h)))
        .collect()
}

pub fn laplacian_batch(model: &MlpModel, points: &[(f64, f64)], h: f64) -> Vec<f64> {
    let u = model.forward_std_batch(&stencil_points(points, h));
    let inv_h2 = 1.0 / (h * h);
    u.chunks_exact(STENCIL.len())
        .map(|c| c.iter().zip(&STENCIL).fold(0.0, |acc, (u, s)| acc + s.2 * u) * inv_h2)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub layer_dims: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub init_scale: f64,
    /// Standardize targets to zero mean and unit variance before training.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_dims: DEFAULT_LAYER_DIMS.to_vec(),
            learning_rate: 1e-3,
            epochs: 2000,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_scale: 1.0,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        validate_dims(&self.layer_dims)?;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NeuralError::Config(format!("learning_rate = {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(NeuralError::Config("epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(NeuralError::Config(format!(
                "Adam moments ({}, {}, {})",
                self.beta1, self.beta2, self.epsilon
            )));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, c: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.epsilon,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Per-epoch losses, recorded before each optimizer step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub data: Vec<f64>,
    /// Empty for plain data-fit training.
    pub pde: Vec<f64>,
    pub total: Vec<f64>,
    /// Running minimum of `total`.
    pub best: Vec<f64>,
}

impl LossTrace {
    fn push(&mut self, data: f64, pde: Option<f64>, total: f64) {
        self.data.push(data);
        if let Some(p) = pde {
            self.pde.push(p);
        }
        let best = self.best.last().map_or(total, |&b: &f64| b.min(total));
        self.total.push(total);
        self.best.push(best);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub trace: LossTrace,
}

/// An additional loss term evaluated once per epoch.
pub(crate) trait Regularizer {
    /// Returns the raw term value and, when `weight > 0`, adds
    /// `weight * d(term)/d(params)` into `grad`.
    fn evaluate(&mut self, model: &MlpModel, epoch: usize, grad: &mut [f64]) -> f64;

    fn weight(&self) -> f64;
}

/// Mean and population standard deviation; a zero spread maps to 1.
fn standardization(samples: &[Sample2D]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().fold(0.0, |a, s| a + s.z) / n;
    let var = samples.iter().fold(0.0, |a, s| a + (s.z - mean).powi(2)) / n;
    let std = var.sqrt();
    (mean, if std > 0.0 && std.is_finite() { std } else { 1.0 })
}

pub(crate) fn train_with(
    samples: &[Sample2D],
    config: &TrainConfig,
    mut extra: Option<&mut dyn Regularizer>,
) -> Result<TrainedModel, NeuralError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    let mut model = init_model_scaled(&config.layer_dims, config.seed, config.init_scale)?;
    if config.standardize {
        (model.z_mean, model.z_std) = standardization(samples);
    }
    let mut adam = Adam::new(model.n_params(), config);
    let mut trace = LossTrace::default();
    for epoch in 0..config.epochs {
        let (data, mut grad) = data_loss_and_grad(&model, samples);
        let (pde, total) = match extra.as_deref_mut() {
            Some(reg) => {
                let p = reg.evaluate(&model, epoch, &mut grad);
                (Some(p), data + reg.weight() * p)
            }
            None => (None, data),
        };
        if !total.is_finite() {
            return Err(NeuralError::Divergence { epoch, loss: total });
        }
        trace.push(data, pde, total);
        adam.step(&mut model.params, &grad);
        model.epochs_trained += 1;
    }
    Ok(TrainedModel { model, trace })
}

/// Full-batch Adam on the standardized data MSE.
pub fn train_mlp(samples: &[Sample2D], config: &TrainConfig) -> Result<TrainedModel, NeuralError> {
    train_with(samples, config, None)
}
