//! Dense feed-forward classifier with hand-written backpropagation.
//!
//! The network maps a `b x d_in` batch through `L` dense layers. The first
//! hidden layer uses LeakyReLU, the remaining hidden layers ReLU, and the
//! single output unit a logistic sigmoid, so the output is `P(residential)`.
//! Training minimises mean binary cross-entropy with the AMSGrad variant of
//! Adam ([`OptimizerState`]).
//!
//! All arithmetic is `f64`. Weight matrix `i` has shape
//! `(layer_sizes[i], layer_sizes[i + 1])` and is applied as `Z = A . W + b`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use ndarray::linalg::general_mat_mul;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureSpec, Standardization};

/// Hidden widths of the reference architecture, input layer first.
pub const DEFAULT_HIDDEN: [usize; 7] = [1024, 512, 128, 64, 32, 16, 8];
pub const DEFAULT_ALPHA: f64 = 0.01;
/// Probability clipping applied before taking logs in [`bce_loss`].
pub const BCE_EPSILON: f64 = 1e-7;
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid layer ladder {0:?}: need at least two positive sizes ending in 1")]
    InvalidLayerLadder(Vec<usize>),
    #[error("leaky slope must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("gradient contains a non-finite value")]
    NonFiniteGradient,
    #[error("model file schema_version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u64, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

/// `[d_in, 1024, 512, 128, 64, 32, 16, 8, 1]`.
pub fn default_layer_sizes(d_in: usize) -> Vec<usize> {
    std::iter::once(d_in)
        .chain(DEFAULT_HIDDEN)
        .chain(std::iter::once(1))
        .collect()
}

#[inline]
pub fn leaky_relu(x: f64, alpha: f64) -> f64 {
    x.max(alpha * x)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Logistic function `1 / (1 + e^-x)`, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(a) => leaky_relu(x, a),
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative with respect to the pre-activation. At zero LeakyReLU
    /// takes the slope `alpha` and ReLU takes 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

/// The activation ladder for `n_layers` dense layers.
fn activations_for(n_layers: usize, alpha: f64) -> Vec<Activation> {
    (0..n_layers)
        .map(|i| {
            if i + 1 == n_layers {
                Activation::Sigmoid
            } else if i == 0 {
                Activation::LeakyRelu(alpha)
            } else {
                Activation::Relu
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    /// `weights[i]` has shape `(layer_sizes[i], layer_sizes[i + 1])`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub activations: Vec<Activation>,
    pub alpha: f64,
}

fn check_ladder(layer_sizes: &[usize], alpha: f64) -> Result<(), NetError> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) || layer_sizes.last() != Some(&1) {
        return Err(NetError::InvalidLayerLadder(layer_sizes.to_vec()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(NetError::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Glorot-uniform weights from a seeded ChaCha8 stream, zero biases.
pub fn init_mlp(layer_sizes: &[usize], alpha: f64, seed: u64) -> Result<Mlp, NetError> {
    check_ladder(layer_sizes, alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
    let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
        weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| dist.sample(&mut rng)));
        biases.push(Array1::zeros(fan_out));
    }
    Ok(Mlp {
        layer_sizes: layer_sizes.to_vec(),
        activations: activations_for(weights.len(), alpha),
        weights,
        biases,
        alpha,
    })
}

/// Everything [`Mlp::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Array2<f64>,
    /// Pre-activations of every layer, output layer last.
    pub pre_activations: Vec<Array2<f64>>,
    /// Post-activations of the hidden layers.
    pub activations: Vec<Array2<f64>>,
    /// Sigmoid output, one probability per row.
    pub output: Array1<f64>,
}

/// Gradients of the loss with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl Mlp {
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Array2::len).sum::<usize>()
            + self.biases.iter().map(Array1::len).sum::<usize>()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), NetError> {
        if x.ncols() != self.input_dim() {
            return Err(NetError::ShapeMismatch(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn affine(&self, layer: usize, a: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = a.dot(&self.weights[layer]);
        z += &self.biases[layer];
        z
    }

    /// Forward pass keeping every intermediate for backpropagation.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardTrace, NetError> {
        self.check_input(&x)?;
        let n = self.num_layers();
        let mut pre = Vec::with_capacity(n);
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(n - 1);
        for layer in 0..n {
            let z = match layer {
                0 => self.affine(0, &x),
                _ => self.affine(layer, &post[layer - 1].view()),
            };
            if layer + 1 < n {
                let act = self.activations[layer];
                post.push(z.mapv(|v| act.apply(v)));
            }
            pre.push(z);
        }
        let out_act = self.activations[n - 1];
        let output = pre[n - 1].column(0).mapv(|v| out_act.apply(v));
        Ok(ForwardTrace {
            input: x.to_owned(),
            pre_activations: pre,
            activations: post,
            output,
        })
    }

    /// Output probabilities only.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, NetError> {
        self.check_input(&x)?;
        let n = self.num_layers();
        let mut a = self.affine(0, &x);
        for layer in 0..n {
            let act = self.activations[layer];
            if layer + 1 == n {
                return Ok(a.column(0).mapv(|v| act.apply(v)));
            }
            a.mapv_inplace(|v| act.apply(v));
            a = self.affine(layer + 1, &a.view());
        }
        unreachable!("a network has at least one layer")
    }

    /// Exact gradients of the mean binary cross-entropy over the traced batch.
    ///
    /// Uses `dL/dZ_out = (y_hat - y) / b`, which holds for a sigmoid output
    /// paired with cross-entropy.
    pub fn backward(&self, trace: &ForwardTrace, y: &[f64]) -> Result<Gradients, NetError> {
        let b = trace.input.nrows();
        if y.len() != b || trace.output.len() != b {
            return Err(NetError::ShapeMismatch(format!(
                "batch has {b} rows, got {} labels",
                y.len()
            )));
        }
        let n = self.num_layers();
        if trace.pre_activations.len() != n || trace.activations.len() != n - 1 {
            return Err(NetError::ShapeMismatch(
                "trace was not produced by this network".into(),
            ));
        }
        let inv_b = 1.0 / b as f64;
        let mut delta = Array2::from_shape_fn((b, 1), |(i, _)| (trace.output[i] - y[i]) * inv_b);

        let mut gw = vec![Array2::zeros((0, 0)); n];
        let mut gb = vec![Array1::zeros(0); n];
        for layer in (0..n).rev() {
            let input = if layer == 0 {
                trace.input.view()
            } else {
                trace.activations[layer - 1].view()
            };
            let mut g = Array2::zeros((input.ncols(), delta.ncols()));
            general_mat_mul(1.0, &input.t(), &delta, 0.0, &mut g);
            gw[layer] = g;
            gb[layer] = delta.sum_axis(Axis(0));
            if layer > 0 {
                let act = self.activations[layer - 1];
                let mut next = delta.dot(&self.weights[layer].t());
                Zip::from(&mut next)
                    .and(&trace.pre_activations[layer - 1])
                    .for_each(|d, &z| *d *= act.derivative(z));
                delta = next;
            }
        }
        Ok(Gradients {
            weights: gw,
            biases: gb,
        })
    }

    /// A network with the same ladder and every parameter set to zero.
    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            layer_sizes: self.layer_sizes.clone(),
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            activations: self.activations.clone(),
            alpha: self.alpha,
        }
    }
}

/// Mean binary cross-entropy with predictions clipped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(y_hat: &[f64], y: &[f64]) -> Result<f64, NetError> {
    if y_hat.len() != y.len() {
        return Err(NetError::LengthMismatch(y_hat.len(), y.len()));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = y_hat
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / y.len() as f64)
}

/// Adam hyperparameters. With `bias_correction` the step size follows
/// `lr * sqrt(1 - beta2^t) / (1 - beta1^t)`; without it the raw `lr` is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmsGradConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub bias_correction: bool,
}

impl Default for AmsGradConfig {
    fn default() -> Self {
        AmsGradConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            bias_correction: true,
        }
    }
}

/// Moment estimates for every parameter of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AmsGradConfig,
    pub step: u64,
    pub m_weights: Vec<Array2<f64>>,
    pub v_weights: Vec<Array2<f64>>,
    pub vhat_weights: Vec<Array2<f64>>,
    pub m_biases: Vec<Array1<f64>>,
    pub v_biases: Vec<Array1<f64>>,
    pub vhat_biases: Vec<Array1<f64>>,
}

impl OptimizerState {
    pub fn new(mlp: &Mlp, config: AmsGradConfig) -> Self {
        let zw = || mlp.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect::<Vec<_>>();
        let zb = || mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect::<Vec<_>>();
        OptimizerState {
            config,
            step: 0,
            m_weights: zw(),
            v_weights: zw(),
            vhat_weights: zw(),
            m_biases: zb(),
            v_biases: zb(),
            vhat_biases: zb(),
        }
    }

    fn check_shapes(&self, mlp: &Mlp, grads: &Gradients) -> Result<(), NetError> {
        let same_w = |a: &[Array2<f64>], b: &[Array2<f64>]| {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| x.shape() == y.shape() && x.is_standard_layout() && y.is_standard_layout())
        };
        let same_b = |a: &[Array1<f64>], b: &[Array1<f64>]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len())
        };
        if !(same_w(&mlp.weights, &grads.weights)
            && same_w(&mlp.weights, &self.m_weights)
            && same_b(&mlp.biases, &grads.biases)
            && same_b(&mlp.biases, &self.m_biases))
        {
            return Err(NetError::ShapeMismatch(
                "gradients or optimizer state do not match the network, or are not in standard layout"
                    .into(),
            ));
        }
        Ok(())
    }

    /// One AMSGrad update of every parameter of `mlp`.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients) -> Result<(), NetError> {
        self.check_shapes(mlp, grads)?;
        if !grads.is_finite() {
            return Err(NetError::NonFiniteGradient);
        }
        self.step += 1;
        let AmsGradConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            bias_correction,
        } = self.config;
        let lr_t = if bias_correction {
            let t = self.step as i32;
            learning_rate * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t))
        } else {
            learning_rate
        };
        let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], vh: &mut [f64]| {
            for i in 0..theta.len() {
                m[i] = flush(beta1 * m[i] + (1.0 - beta1) * g[i]);
                v[i] = flush(beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]);
                vh[i] = vh[i].max(v[i]);
                theta[i] -= lr_t * m[i] / (vh[i].sqrt() + epsilon);
            }
        };
        for i in 0..mlp.weights.len() {
            update(
                contiguous_mut(&mut mlp.weights[i]),
                contiguous(&grads.weights[i]),
                contiguous_mut(&mut self.m_weights[i]),
                contiguous_mut(&mut self.v_weights[i]),
                contiguous_mut(&mut self.vhat_weights[i]),
            );
            update(
                contiguous_mut(&mut mlp.biases[i]),
                contiguous(&grads.biases[i]),
                contiguous_mut(&mut self.m_biases[i]),
                contiguous_mut(&mut self.v_biases[i]),
                contiguous_mut(&mut self.vhat_biases[i]),
            );
        }
        Ok(())
    }
}

/// Subnormal moments are set to zero; decaying moments of idle units would
/// otherwise sit in the slow subnormal range for many steps.
#[inline]
fn flush(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}

fn contiguous_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are stored in standard layout")
}

fn contiguous<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("gradients are stored in standard layout")
}

/// Free-function form of [`OptimizerState::step`].
pub fn amsgrad_step(
    mlp: &mut Mlp,
    grads: &Gradients,
    state: &mut OptimizerState,
) -> Result<(), NetError> {
    state.step(mlp, grads)
}

/// A trained network together with the feature encoding it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub mlp: Mlp,
    pub feature_spec: FeatureSpec,
    pub standardization: Standardization,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    layer_sizes: Vec<usize>,
    alpha: f64,
    activations: Vec<String>,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    feature_spec: FeatureSpec,
    standardization: Standardization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Serialize a model as JSON. Numbers are written in shortest round-trip form,
/// so [`load_model`] restores every weight bit for bit.
pub fn save_model(bundle: &ModelBundle) -> String {
    let mlp = &bundle.mlp;
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        layer_sizes: mlp.layer_sizes.clone(),
        alpha: mlp.alpha,
        activations: mlp.activations.iter().map(|a| a.name().to_string()).collect(),
        weights: mlp
            .weights
            .iter()
            .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
            .collect(),
        biases: mlp.biases.iter().map(|b| b.to_vec()).collect(),
        feature_spec: bundle.feature_spec.clone(),
        standardization: bundle.standardization.clone(),
        seed: bundle.seed,
    };
    serde_json::to_string(&file).expect("model values always serialize")
}

pub fn load_model(text: &str) -> Result<ModelBundle, NetError> {
    let corrupt = |m: String| NetError::CorruptModel(m);
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("missing schema_version".into()))?;
    if version != MODEL_SCHEMA_VERSION as u64 {
        return Err(NetError::SchemaMismatch {
            found: version,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    check_ladder(&file.layer_sizes, file.alpha).map_err(|e| corrupt(e.to_string()))?;
    let n = file.layer_sizes.len() - 1;
    if file.weights.len() != n || file.biases.len() != n {
        return Err(corrupt(format!("expected {n} weight and bias blocks")));
    }
    let activations = activations_for(n, file.alpha);
    let names: Vec<&str> = activations.iter().map(|a| a.name()).collect();
    if file.activations != names {
        return Err(corrupt(format!(
            "unsupported activation ladder {:?}",
            file.activations
        )));
    }
    let mut weights = Vec::with_capacity(n);
    let mut biases = Vec::with_capacity(n);
    for (i, (w, b)) in file.weights.into_iter().zip(file.biases).enumerate() {
        let (rows, cols) = (file.layer_sizes[i], file.layer_sizes[i + 1]);
        if w.len() != rows || w.iter().any(|r| r.len() != cols) || b.len() != cols {
            return Err(corrupt(format!("layer {i} does not have shape ({rows}, {cols})")));
        }
        let flat: Vec<f64> = w.into_iter().flatten().collect();
        weights.push(Array2::from_shape_vec((rows, cols), flat).expect("shape checked"));
        biases.push(Array1::from(b));
    }
    if file.feature_spec.feature_names.len() != file.layer_sizes[0] {
        return Err(corrupt(format!(
            "feature spec has {} columns, network expects {}",
            file.feature_spec.feature_names.len(),
            file.layer_sizes[0]
        )));
    }
    Ok(ModelBundle {
        mlp: Mlp {
            layer_sizes: file.layer_sizes,
            weights,
            biases,
            activations,
            alpha: file.alpha,
        },
        feature_spec: file.feature_spec,
        standardization: file.standardization,
        seed: file.seed,
    })
}
