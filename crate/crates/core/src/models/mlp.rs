//! Dense feed-forward networks trained by per-sample stochastic gradient
//! descent with optional momentum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::softmax_in_place;
use super::{
    require, resolve_config, Algorithm, Classifier, ModelError, ModelKind, ModelParams, TrainedModel, TrainingSet,
};
use crate::data::{EncodedMatrix, EncodingScheme};
use crate::netscript::{self, Activation, NetworkTopology};

const SCORE_FLOOR: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputLoss {
    /// Independent sigmoid units, each with binary cross-entropy.
    Sigmoid,
    /// Softmax over the outputs with categorical cross-entropy.
    Softmax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    /// Hidden layer widths; ignored when `netscript` is set.
    pub hidden_layers: Vec<usize>,
    /// Topology script, elaborated against the training width.
    pub netscript: Option<String>,
    pub hidden_activation: Activation,
    pub output_loss: OutputLoss,
    pub learning_rate: f64,
    pub iterations: usize,
    pub init_scale: f64,
    pub momentum: f64,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layers: vec![100],
            netscript: None,
            hidden_activation: Activation::Sigmoid,
            output_loss: OutputLoss::Sigmoid,
            learning_rate: 0.1,
            iterations: 100,
            init_scale: 0.1,
            momentum: 0.0,
            shuffle: true,
            seed: 1,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        require(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be positive",
        )?;
        require(self.iterations > 0, "iterations must be positive")?;
        require(self.init_scale > 0.0, "init_scale must be positive")?;
        require(
            self.momentum >= 0.0 && self.momentum < 1.0,
            "momentum must lie in [0, 1)",
        )?;
        require(
            self.hidden_activation != Activation::Softmax,
            "softmax is not a hidden activation",
        )?;
        require(
            self.hidden_layers.iter().all(|&w| w > 0),
            "hidden layer widths must be positive",
        )
    }

    pub fn topology(&self, input_width: usize, n_classes: usize) -> Result<NetworkTopology, ModelError> {
        let mut topo = match &self.netscript {
            Some(text) => {
                let ast = netscript::parse(text)?;
                netscript::elaborate_with(&ast, input_width, n_classes, self.hidden_activation)?
            }
            None => {
                let mut t = NetworkTopology::dense(input_width, &self.hidden_layers, n_classes);
                let last = t.activations.len() - 1;
                t.activations[..last].fill(self.hidden_activation);
                t
            }
        };
        if self.output_loss == OutputLoss::Softmax {
            *topo.activations.last_mut().unwrap() = Activation::Softmax;
        }
        Ok(topo)
    }

    /// Total hidden units.
    pub fn hidden_nodes(&self) -> Result<usize, ModelError> {
        Ok(match &self.netscript {
            Some(text) => netscript::total_hidden_nodes(&netscript::parse(text)?),
            None => self.hidden_layers.iter().sum(),
        })
    }
}

/// Weights of layer `l` are stored input-major: entry `i * out + o`
/// connects input `i` to output `o`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn activate(act: Activation, z: &mut [f64]) {
    match act {
        Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Softmax => softmax_in_place(z),
    }
}

/// Derivative of a hidden activation expressed through its output.
fn derivative(act: Activation, a: f64) -> f64 {
    match act {
        Activation::Sigmoid => a * (1.0 - a),
        Activation::Tanh => 1.0 - a * a,
        Activation::Softmax => unreachable!("softmax is only used on the output layer"),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4 * 4;
    for (ca, cb) in a[..chunks].chunks_exact(4).zip(b[..chunks].chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += ca[k] * cb[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a[chunks..].iter().zip(&b[chunks..]) {
        s += x * y;
    }
    s
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Per-layer weight and bias gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Buffers reused across SGD steps.
#[derive(Default)]
struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl Network {
    pub fn init(topology: &NetworkTopology, init_scale: f64, rng: &mut impl Rng) -> Self {
        let half = init_scale / 2.0;
        let sizes = topology.sizes.clone();
        let weights = sizes
            .windows(2)
            .map(|w| (0..w[0] * w[1]).map(|_| rng.gen_range(-half..=half)).collect())
            .collect();
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Network {
            activations: topology.activations.clone(),
            sizes,
            weights,
            biases,
        }
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    fn output_activation(&self) -> Activation {
        *self.activations.last().unwrap()
    }

    /// Activations of every layer, input first; the last entry holds the
    /// output pre-activations.
    fn forward(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize(self.n_layers() + 1, Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(x);
        for l in 0..self.n_layers() {
            let (before, after) = acts.split_at_mut(l + 1);
            let (input, z) = (&before[l], &mut after[0]);
            let out = self.sizes[l + 1];
            z.clear();
            z.extend_from_slice(&self.biases[l]);
            let w = &self.weights[l];
            for (i, &a) in input.iter().enumerate() {
                if a != 0.0 {
                    axpy(z, a, &w[i * out..(i + 1) * out]);
                }
            }
            if l + 1 < self.n_layers() {
                activate(self.activations[l], z);
            }
        }
    }

    fn loss_from_logits(&self, z: &[f64], target: usize) -> f64 {
        match self.output_activation() {
            Activation::Softmax => {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                lse - z[target]
            }
            _ => z
                .iter()
                .enumerate()
                .map(|(k, &v)| softplus(v) - if k == target { v } else { 0.0 })
                .sum(),
        }
    }

    /// Turns output pre-activations into `dLoss/dz` in place.
    fn output_delta(&self, z: &mut [f64], target: usize) {
        match self.output_activation() {
            Activation::Softmax => softmax_in_place(z),
            _ => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
        }
        z[target] -= 1.0;
    }

    pub fn loss(&self, x: &[f64], target: usize) -> f64 {
        let mut acts = Vec::new();
        self.forward(x, &mut acts);
        self.loss_from_logits(acts.last().unwrap(), target)
    }

    /// Exact backpropagated gradients of [`Network::loss`].
    pub fn gradients(&self, x: &[f64], target: usize) -> (f64, Gradients) {
        let mut acts = Vec::new();
        self.forward(x, &mut acts);
        let loss = self.loss_from_logits(acts.last().unwrap(), target);
        let mut delta = acts.last().unwrap().clone();
        self.output_delta(&mut delta, target);
        let mut gw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        for l in (0..self.n_layers()).rev() {
            let out = self.sizes[l + 1];
            let input = &acts[l];
            gb[l].copy_from_slice(&delta);
            for (i, &a) in input.iter().enumerate() {
                axpy(&mut gw[l][i * out..(i + 1) * out], a, &delta);
            }
            if l > 0 {
                let act = self.activations[l - 1];
                delta = input
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| dot(&self.weights[l][i * out..(i + 1) * out], &delta) * derivative(act, a))
                    .collect();
            }
        }
        (
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        )
    }

    /// One SGD step on a single sample; returns the loss before the step.
    fn sgd_step(
        &mut self,
        x: &[f64],
        target: usize,
        rate: f64,
        momentum: f64,
        velocity: &mut Option<Gradients>,
        scratch: &mut Scratch,
    ) -> f64 {
        let Scratch { acts, delta, next } = scratch;
        self.forward(x, acts);
        let loss = self.loss_from_logits(acts.last().unwrap(), target);
        delta.clear();
        delta.extend_from_slice(acts.last().unwrap());
        self.output_delta(delta, target);
        for l in (0..self.n_layers()).rev() {
            let out = self.sizes[l + 1];
            let input = &acts[l];
            let w = &mut self.weights[l];
            let propagate = l > 0;
            next.clear();
            match velocity {
                None => {
                    for (i, &a) in input.iter().enumerate() {
                        let row = &mut w[i * out..(i + 1) * out];
                        if propagate {
                            next.push(dot(row, delta) * derivative(self.activations[l - 1], a));
                        }
                        if a != 0.0 {
                            axpy(row, -rate * a, delta);
                        }
                    }
                    axpy(&mut self.biases[l], -rate, delta);
                }
                Some(v) => {
                    let (vw, vb) = (&mut v.weights[l], &mut v.biases[l]);
                    for (i, &a) in input.iter().enumerate() {
                        let row = &mut w[i * out..(i + 1) * out];
                        if propagate {
                            next.push(dot(row, delta) * derivative(self.activations[l - 1], a));
                        }
                        let vrow = &mut vw[i * out..(i + 1) * out];
                        for ((wv, vv), &d) in row.iter_mut().zip(vrow.iter_mut()).zip(delta.iter()) {
                            *vv = momentum * *vv - rate * a * d;
                            *wv += *vv;
                        }
                    }
                    for ((b, vv), &d) in self.biases[l].iter_mut().zip(vb.iter_mut()).zip(delta.iter()) {
                        *vv = momentum * *vv - rate * d;
                        *b += *vv;
                    }
                }
            }
            if propagate {
                std::mem::swap(delta, next);
            }
        }
        loss
    }

    pub fn fit(set: &TrainingSet<'_>, cfg: &MlpConfig) -> Result<Self, ModelError> {
        Self::fit_with_history(set, cfg).map(|(n, _)| n)
    }

    /// Also returns the mean training loss of every epoch.
    pub fn fit_with_history(set: &TrainingSet<'_>, cfg: &MlpConfig) -> Result<(Self, Vec<f64>), ModelError> {
        cfg.validate()?;
        if set.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let topology = cfg.topology(set.n_cols, set.n_classes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut net = Network::init(&topology, cfg.init_scale, &mut rng);
        let mut velocity = (cfg.momentum > 0.0).then(|| Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        });
        let mut order: Vec<usize> = (0..set.len()).collect();
        let mut scratch = Scratch::default();
        let mut history = Vec::with_capacity(cfg.iterations);
        for iteration in 0..cfg.iterations {
            if cfg.shuffle {
                order.shuffle(&mut rng);
            }
            let mut total = 0.0;
            for &i in &order {
                total += net.sgd_step(
                    set.row(i),
                    set.labels[i],
                    cfg.learning_rate,
                    cfg.momentum,
                    &mut velocity,
                    &mut scratch,
                );
            }
            let loss = total / set.len() as f64;
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { iteration, loss });
            }
            history.push(loss);
        }
        Ok((net, history))
    }
}

impl Classifier for Network {
    fn input_width(&self) -> usize {
        self.sizes[0]
    }

    fn n_classes(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn scores_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = Vec::new();
        self.forward(x, &mut acts);
        let mut z = acts.pop().unwrap();
        match self.output_activation() {
            Activation::Softmax => softmax_in_place(&mut z),
            _ => z
                .iter_mut()
                .for_each(|v| *v = sigmoid(*v).clamp(SCORE_FLOOR, 1.0 - SCORE_FLOOR)),
        }
        z
    }
}

pub(crate) struct NeuralNetwork;

impl Algorithm for NeuralNetwork {
    fn kind(&self) -> ModelKind {
        ModelKind::NeuralNetwork
    }

    fn default_encoding(&self) -> EncodingScheme {
        EncodingScheme::MIXED_MINMAX
    }

    fn default_config(&self) -> serde_json::Value {
        serde_json::to_value(MlpConfig::default()).expect("config serializes")
    }

    fn train(&self, train: &EncodedMatrix, config: &serde_json::Value) -> Result<TrainedModel, ModelError> {
        let cfg: MlpConfig = resolve_config(config)?;
        let model = Network::fit(&TrainingSet::from_matrix(train), &cfg)?;
        Ok(TrainedModel::new(
            ModelParams::NeuralNetwork(model),
            train.encoder.clone(),
        ))
    }
}
