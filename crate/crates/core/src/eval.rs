//! Confusion matrices and the six multiclass summary metrics.
//!
//! All metrics are ratios of integer counts with one final division.
//! Macro-averaged precision is undefined when some class is never
//! predicted, and macro-averaged recall when some class never occurs; both
//! serialize as the string `"NaN"`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("length mismatch: {truth} truths vs {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("class index {0} outside the {1}-class range")]
    ClassOutOfRange(usize, usize),
    #[error("empty confusion matrix")]
    EmptyMatrix,
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize, count: u64) {
        self.counts[truth * self.n_classes + predicted] += count;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|k| self.get(k, k)).sum()
    }

    /// Column sum: how often `k` was predicted.
    pub fn predicted_count(&self, k: usize) -> u64 {
        (0..self.n_classes).map(|t| self.get(t, k)).sum()
    }

    /// Row sum: how often `k` was the true class.
    pub fn true_count(&self, k: usize) -> u64 {
        (0..self.n_classes).map(|p| self.get(k, p)).sum()
    }

    /// Relabels classes: class `k` becomes `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> ConfusionMatrix {
        let mut out = ConfusionMatrix::new(self.n_classes);
        for t in 0..self.n_classes {
            for p in 0..self.n_classes {
                out.add(perm[t], perm[p], self.get(t, p));
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n_classes).map(<[u64]>::to_vec).collect()
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize]) -> Result<ConfusionMatrix, EvalError> {
    confusion_with_classes(NUM_CLASSES, truth, predicted)
}

pub fn confusion_with_classes(
    n_classes: usize,
    truth: &[usize],
    predicted: &[usize],
) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(n_classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        for c in [t, p] {
            if c >= n_classes {
                return Err(EvalError::ClassOutOfRange(c, n_classes));
            }
        }
        cm.add(t, p, 1);
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub micro_precision: f64,
    #[serde(with = "nan_string")]
    pub macro_precision: Option<f64>,
    pub micro_recall: f64,
    #[serde(with = "nan_string")]
    pub macro_recall: Option<f64>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.n_classes() as u64;
    let trace = cm.trace();

    // sum over classes of TP_k + TN_k = K*total - sum(FP_k + FN_k)
    //                                 = K*total - 2*(total - trace)
    let mut correct_one_vs_rest = 0u64;
    let (mut sum_fp, mut sum_fn) = (0u64, 0u64);
    let mut precisions = Vec::with_capacity(k as usize);
    let mut recalls = Vec::with_capacity(k as usize);
    for c in 0..cm.n_classes() {
        let tp = cm.get(c, c);
        let predicted = cm.predicted_count(c);
        let actual = cm.true_count(c);
        let fp = predicted - tp;
        let fn_ = actual - tp;
        correct_one_vs_rest += total - fp - fn_;
        sum_fp += fp;
        sum_fn += fn_;
        precisions.push((predicted > 0).then(|| tp as f64 / predicted as f64));
        recalls.push((actual > 0).then(|| tp as f64 / actual as f64));
    }
    let macro_mean = |values: Vec<Option<f64>>| -> Option<f64> {
        let values: Option<Vec<f64>> = values.into_iter().collect();
        values.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };

    Ok(MetricsReport {
        overall_accuracy: trace as f64 / total as f64,
        average_accuracy: correct_one_vs_rest as f64 / (k * total) as f64,
        micro_precision: trace as f64 / (trace + sum_fp) as f64,
        macro_precision: macro_mean(precisions),
        micro_recall: trace as f64 / (trace + sum_fn) as f64,
        macro_recall: macro_mean(recalls),
    })
}

/// `1 - 2 (1 - overall) / K`, the one-vs-rest average accuracy implied by
/// an overall accuracy over `K` classes.
pub fn average_from_overall(overall: f64, n_classes: usize) -> f64 {
    1.0 - 2.0 * (1.0 - overall) / n_classes as f64
}

pub const METRIC_NAMES: [&str; 6] = [
    "Overall accuracy",
    "Average accuracy",
    "Micro-averaged precision",
    "Macro-averaged precision",
    "Micro-averaged recall",
    "Macro-averaged recall",
];

impl MetricsReport {
    pub fn values(&self) -> [Option<f64>; 6] {
        [
            Some(self.overall_accuracy),
            Some(self.average_accuracy),
            Some(self.micro_precision),
            self.macro_precision,
            Some(self.micro_recall),
            self.macro_recall,
        ]
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Metrics")?;
        for (name, value) in METRIC_NAMES.iter().zip(self.values()) {
            match value {
                Some(v) => writeln!(f, "{name}\t{v:.6}")?,
                None => writeln!(f, "{name}\tNaN")?,
            }
        }
        Ok(())
    }
}

mod nan_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str("NaN"),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(Some(x)),
            Repr::Text(t) if t == "NaN" => Ok(None),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected number or \"NaN\", got {t:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_for_perfect_predictions() {
        let y = vec![0, 1, 2, 2, 17];
        let cm = confusion(&y, &y).unwrap();
        for t in 0..NUM_CLASSES {
            for p in 0..NUM_CLASSES {
                if t != p {
                    assert_eq!(cm.get(t, p), 0);
                }
            }
        }
        assert_eq!(cm.trace(), 5);
        let cm3 = confusion_with_classes(3, &[0, 1, 2], &[0, 1, 2]).unwrap();
        let m = metrics(&cm3).unwrap();
        for v in m.values() {
            assert_eq!(v, Some(1.0));
        }
    }

    #[test]
    fn single_predicted_column() {
        let cm = confusion(&[0, 3, 5, 5], &[0, 0, 0, 0]).unwrap();
        for p in 1..NUM_CLASSES {
            assert_eq!(cm.predicted_count(p), 0);
        }
        assert_eq!(cm.predicted_count(0), 4);
        let m = metrics(&cm).unwrap();
        assert_eq!(m.macro_precision, None);
        assert_eq!(m.macro_recall, None);
        assert!(m.to_string().contains("Macro-averaged precision\tNaN"));
    }

    #[test]
    fn hand_built_three_samples() {
        // truth 0,1,1 predicted 0,0,1
        let cm = confusion_with_classes(2, &[0, 1, 1], &[0, 0, 1]).unwrap();
        assert_eq!(cm.rows(), vec![vec![1, 0], vec![1, 1]]);
        let m = metrics(&cm).unwrap();
        assert!((m.overall_accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.macro_precision, Some((0.5 + 1.0) / 2.0));
        assert_eq!(m.macro_recall, Some((1.0 + 0.5) / 2.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion(&[0], &[]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(
            confusion(&[18], &[0]),
            Err(EvalError::ClassOutOfRange(18, 18))
        ));
        assert_eq!(metrics(&ConfusionMatrix::new(18)), Err(EvalError::EmptyMatrix));
    }

    #[test]
    fn nan_serialization() {
        let cm = confusion(&[0, 1], &[0, 0]).unwrap();
        let m = metrics(&cm).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"macro_precision\":\"NaN\""));
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
