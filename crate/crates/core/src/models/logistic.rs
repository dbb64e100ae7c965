//! Multinomial logistic regression fitted by full-batch gradient descent on
//! mean cross-entropy plus an L2 penalty on the weights (not the biases).

use serde::{Deserialize, Serialize};

use super::{
    require, resolve_config, Algorithm, Classifier, ModelError, ModelKind, ModelParams, TrainedModel, TrainingSet,
};
use crate::data::{EncodedMatrix, EncodingScheme};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticRegressionConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2_weight: f64,
    pub seed: u64,
}

impl Default for LogisticRegressionConfig {
    fn default() -> Self {
        LogisticRegressionConfig {
            learning_rate: 1.0,
            iterations: 500,
            l2_weight: 1e-3,
            seed: 1,
        }
    }
}

impl LogisticRegressionConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        require(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be positive",
        )?;
        require(self.iterations > 0, "iterations must be positive")?;
        require(self.l2_weight >= 0.0, "l2_weight must be non-negative")
    }
}

/// `weights` is class-major: row `k` holds the coefficients of class `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl LogisticModel {
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        LogisticModel {
            n_features,
            n_classes,
            weights: vec![0.0; n_features * n_classes],
            biases: vec![0.0; n_classes],
        }
    }

    fn logits(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.biases);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (k, o) in out.iter_mut().enumerate() {
                    *o += self.weights[k * self.n_features + j] * xj;
                }
            }
        }
    }

    /// Objective value and its gradient (weights then biases).
    pub fn loss_and_gradient(&self, set: &TrainingSet<'_>, l2_weight: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let (d, k) = (self.n_features, self.n_classes);
        let mut gw = vec![0.0; d * k];
        let mut gb = vec![0.0; k];
        let mut loss = 0.0;
        let mut p = vec![0.0; k];
        for i in 0..set.len() {
            let x = set.row(i);
            let y = set.labels[i];
            self.logits(x, &mut p);
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + p.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            loss += lse - p[y];
            softmax_in_place(&mut p);
            p[y] -= 1.0;
            for c in 0..k {
                gb[c] += p[c];
            }
            for (j, &xj) in x.iter().enumerate() {
                if xj != 0.0 {
                    for c in 0..k {
                        gw[c * d + j] += p[c] * xj;
                    }
                }
            }
        }
        let n = set.len() as f64;
        loss /= n;
        gb.iter_mut().for_each(|g| *g /= n);
        let mut penalty = 0.0;
        for (g, &w) in gw.iter_mut().zip(&self.weights) {
            *g = *g / n + l2_weight * w;
            penalty += w * w;
        }
        (loss + 0.5 * l2_weight * penalty, gw, gb)
    }

    pub fn fit(set: &TrainingSet<'_>, cfg: &LogisticRegressionConfig) -> Result<Self, ModelError> {
        Self::fit_with_history(set, cfg).map(|(m, _)| m)
    }

    /// Also returns the objective before each update.
    pub fn fit_with_history(
        set: &TrainingSet<'_>,
        cfg: &LogisticRegressionConfig,
    ) -> Result<(Self, Vec<f64>), ModelError> {
        cfg.validate()?;
        if set.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let mut model = LogisticModel::zeros(set.n_cols, set.n_classes);
        let mut history = Vec::with_capacity(cfg.iterations);
        for iteration in 0..cfg.iterations {
            let (loss, gw, gb) = model.loss_and_gradient(set, cfg.l2_weight);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { iteration, loss });
            }
            history.push(loss);
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= cfg.learning_rate * g;
            }
            for (b, g) in model.biases.iter_mut().zip(&gb) {
                *b -= cfg.learning_rate * g;
            }
        }
        let (loss, _, _) = model.loss_and_gradient(set, cfg.l2_weight);
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                iteration: cfg.iterations,
                loss,
            });
        }
        Ok((model, history))
    }
}

impl Classifier for LogisticModel {
    fn input_width(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn scores_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n_classes];
        self.logits(x, &mut z);
        softmax_in_place(&mut z);
        z
    }
}

pub(crate) struct LogisticRegression;

impl Algorithm for LogisticRegression {
    fn kind(&self) -> ModelKind {
        ModelKind::LogisticRegression
    }

    fn default_encoding(&self) -> EncodingScheme {
        EncodingScheme::MIXED_MINMAX
    }

    fn default_config(&self) -> serde_json::Value {
        serde_json::to_value(LogisticRegressionConfig::default()).expect("config serializes")
    }

    fn train(&self, train: &EncodedMatrix, config: &serde_json::Value) -> Result<TrainedModel, ModelError> {
        let cfg: LogisticRegressionConfig = resolve_config(config)?;
        let model = LogisticModel::fit(&TrainingSet::from_matrix(train), &cfg)?;
        Ok(TrainedModel::new(
            ModelParams::LogisticRegression(model),
            train.encoder.clone(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uniform_scores() {
        let m = LogisticModel::zeros(3, 18);
        let s = m.scores(&[0.2, 0.5, 1.0]).unwrap();
        assert!(s.iter().all(|&v| (v - 1.0 / 18.0).abs() < 1e-15));
        assert_eq!(super::super::argmax(&s), 0);
        assert!(matches!(
            m.scores(&[0.0; 4]),
            Err(ModelError::Shape { expected: 3, got: 4 })
        ));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = LogisticRegressionConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
