//! From-scratch multiclass classifiers behind a common [`Classifier`] trait,
//! plus a name-keyed [`Registry`] of training algorithms.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::Position;
use crate::data::{EncodedMatrix, Encoder, EncodingScheme};
use crate::label::{ClassLabel, NUM_CLASSES};
use crate::netscript::NetScriptError;

pub mod forest;
pub mod jungle;
pub mod logistic;
pub mod mlp;
pub mod nodes;

pub use forest::{DecisionForestConfig, Forest, ImpurityCriterion};
pub use jungle::{DecisionJungleConfig, Jungle, LevelTrace};
pub use logistic::{LogisticModel, LogisticRegressionConfig};
pub use mlp::{MlpConfig, Network, OutputLoss};
pub use nodes::{Dag, Node, Split};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature width {got} does not match the model's {expected}")]
    Shape { expected: usize, got: usize },
    #[error("loss became non-finite ({loss}) at iteration {iteration}; the learning rate is probably too high")]
    NonFiniteLoss { iteration: usize, loss: f64 },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("malformed configuration: {0}")]
    Config(#[from] serde_json::Error),
    #[error(transparent)]
    NetScript(#[from] NetScriptError),
}

/// Borrowed view of a training problem with arbitrary width and class count.
#[derive(Clone, Copy, Debug)]
pub struct TrainingSet<'a> {
    pub features: &'a [f64],
    pub labels: &'a [usize],
    pub n_cols: usize,
    pub n_classes: usize,
}

impl<'a> TrainingSet<'a> {
    pub fn new(features: &'a [f64], labels: &'a [usize], n_cols: usize, n_classes: usize) -> Self {
        assert_eq!(features.len(), labels.len() * n_cols, "feature matrix shape");
        TrainingSet {
            features,
            labels,
            n_cols,
            n_classes,
        }
    }

    pub fn from_matrix(m: &'a EncodedMatrix) -> Self {
        TrainingSet::new(&m.features, &m.labels, m.n_cols, NUM_CLASSES)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

/// Inference interface shared by every learned model.
pub trait Classifier {
    fn input_width(&self) -> usize;
    fn n_classes(&self) -> usize;
    /// Unchecked scoring; callers guarantee `x.len() == input_width()`.
    fn scores_unchecked(&self, x: &[f64]) -> Vec<f64>;

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        if x.len() != self.input_width() {
            return Err(ModelError::Shape {
                expected: self.input_width(),
                got: x.len(),
            });
        }
        Ok(self.scores_unchecked(x))
    }

    fn predict_index(&self, x: &[f64]) -> Result<usize, ModelError> {
        Ok(argmax(&self.scores(x)?))
    }
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose argmax prediction matches the label.
pub fn training_accuracy(model: &dyn Classifier, set: &TrainingSet<'_>) -> f64 {
    let correct = (0..set.len())
        .filter(|&i| argmax(&model.scores_unchecked(set.row(i))) == set.labels[i])
        .count();
    correct as f64 / set.len() as f64
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LogisticRegression,
    DecisionForest,
    DecisionJungle,
    NeuralNetwork,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::LogisticRegression,
        ModelKind::DecisionForest,
        ModelKind::DecisionJungle,
        ModelKind::NeuralNetwork,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "logistic-regression",
            ModelKind::DecisionForest => "decision-forest",
            ModelKind::DecisionJungle => "decision-jungle",
            ModelKind::NeuralNetwork => "neural-network",
        }
    }

    pub fn from_name(name: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "kebab-case")]
pub enum ModelParams {
    LogisticRegression(LogisticModel),
    DecisionForest(Forest),
    DecisionJungle(Jungle),
    NeuralNetwork(Network),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::LogisticRegression(_) => ModelKind::LogisticRegression,
            ModelParams::DecisionForest(_) => ModelKind::DecisionForest,
            ModelParams::DecisionJungle(_) => ModelKind::DecisionJungle,
            ModelParams::NeuralNetwork(_) => ModelKind::NeuralNetwork,
        }
    }

    pub fn classifier(&self) -> &dyn Classifier {
        match self {
            ModelParams::LogisticRegression(m) => m,
            ModelParams::DecisionForest(m) => m,
            ModelParams::DecisionJungle(m) => m,
            ModelParams::NeuralNetwork(m) => m,
        }
    }
}

/// A trained classifier together with the encoding its inputs must use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub class_order: Vec<ClassLabel>,
    pub encoder: Encoder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: ClassLabel,
    pub scores: Vec<f64>,
}

impl TrainedModel {
    pub fn new(params: ModelParams, encoder: Encoder) -> Self {
        TrainedModel {
            params,
            class_order: ClassLabel::all().collect(),
            encoder,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn fingerprint(&self) -> String {
        self.encoder.fingerprint()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        if x.len() != self.encoder.width() {
            return Err(ModelError::Shape {
                expected: self.encoder.width(),
                got: x.len(),
            });
        }
        let scores = self.params.classifier().scores(x)?;
        Ok(Prediction {
            label: self.class_order[argmax(&scores)],
            scores,
        })
    }

    pub fn predict_position(&self, p: &Position) -> Result<Prediction, ModelError> {
        self.predict(&self.encoder.encode_position(p))
    }

    /// Predicted class indices for every row of `m`.
    pub fn predict_matrix(&self, m: &EncodedMatrix) -> Result<Vec<usize>, ModelError> {
        (0..m.n_rows())
            .map(|i| self.predict(m.row(i)).map(|p| p.label.index()))
            .collect()
    }
}

/// A named training procedure, configured by a JSON document.
pub trait Algorithm: Send + Sync {
    fn kind(&self) -> ModelKind;
    fn default_encoding(&self) -> EncodingScheme;
    fn default_config(&self) -> serde_json::Value;
    /// Trains on `train`; `config` may be partial, missing fields take defaults.
    fn train(&self, train: &EncodedMatrix, config: &serde_json::Value) -> Result<TrainedModel, ModelError>;

    fn name(&self) -> &'static str {
        self.kind().name()
    }
}

/// Fills missing fields of `config` from the config type's defaults.
pub(crate) fn resolve_config<C>(config: &serde_json::Value) -> Result<C, ModelError>
where
    C: Default + Serialize + for<'de> Deserialize<'de>,
{
    let mut merged = serde_json::to_value(C::default())?;
    match (merged.as_object_mut(), config) {
        (Some(base), serde_json::Value::Object(overrides)) => {
            for (k, v) in overrides {
                if !base.contains_key(k) {
                    return Err(ModelError::InvalidConfig(format!("unknown field `{k}`")));
                }
                base.insert(k.clone(), v.clone());
            }
        }
        (_, serde_json::Value::Null) => {}
        _ => return Err(ModelError::InvalidConfig("configuration must be a JSON object".into())),
    }
    Ok(serde_json::from_value(merged)?)
}

pub struct Registry {
    algorithms: BTreeMap<&'static str, Box<dyn Algorithm>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            algorithms: BTreeMap::new(),
        }
    }

    /// The four built-in classifiers.
    pub fn standard() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(logistic::LogisticRegression));
        r.register(Box::new(forest::DecisionForest));
        r.register(Box::new(jungle::DecisionJungle));
        r.register(Box::new(mlp::NeuralNetwork));
        r
    }

    pub fn register(&mut self, algorithm: Box<dyn Algorithm>) {
        self.algorithms.insert(algorithm.name(), algorithm);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Algorithm, ModelError> {
        self.algorithms
            .get(name)
            .map(|a| a.as_ref())
            .ok_or_else(|| ModelError::UnknownAlgorithm(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.algorithms.keys().copied()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::standard()
    }
}

pub(crate) fn require(cond: bool, message: &str) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidConfig(message.to_string()))
    }
}
