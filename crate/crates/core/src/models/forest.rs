//! Bagged ensembles of randomized axis-aligned decision trees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nodes::{self, bag, draw_candidates, ensemble_scores, Candidate, Dag, Node, Split};
use super::{
    require, resolve_config, Algorithm, Classifier, ModelError, ModelKind, ModelParams, TrainedModel, TrainingSet,
};
use crate::data::{EncodedMatrix, EncodingScheme};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpurityCriterion {
    Gini,
    Entropy,
}

impl ImpurityCriterion {
    pub(crate) fn weighted(self, h: &[u32]) -> f64 {
        match self {
            ImpurityCriterion::Gini => nodes::weighted_gini(h),
            ImpurityCriterion::Entropy => nodes::weighted_entropy(h),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub n_random_splits_per_node: usize,
    pub bagging_fraction: f64,
    /// Draw bags with replacement.
    pub bootstrap: bool,
    pub criterion: ImpurityCriterion,
    pub seed: u64,
}

impl Default for DecisionForestConfig {
    fn default() -> Self {
        DecisionForestConfig {
            n_trees: 8,
            max_depth: 32,
            n_random_splits_per_node: 128,
            bagging_fraction: 1.0,
            bootstrap: true,
            criterion: ImpurityCriterion::Gini,
            seed: 1,
        }
    }
}

impl DecisionForestConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        require(self.n_trees > 0, "n_trees must be positive")?;
        require(self.max_depth > 0, "max_depth must be positive")?;
        require(
            self.n_random_splits_per_node > 0,
            "n_random_splits_per_node must be positive",
        )?;
        require(
            self.bagging_fraction > 0.0 && self.bagging_fraction <= 1.0,
            "bagging_fraction must lie in (0, 1]",
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<Dag>,
}

/// Random stream of ensemble member `member`.
pub(crate) fn member_rng(seed: u64, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64);
    rng
}

/// Grows one tree breadth-first. A node becomes a leaf when it is pure,
/// at `max_depth`, or constant in every feature; otherwise it takes the
/// best of its random candidates, even if no candidate reduces impurity.
pub(crate) fn grow_tree(
    set: &TrainingSet<'_>,
    samples: Vec<u32>,
    cfg: &DecisionForestConfig,
    rng: &mut ChaCha8Rng,
) -> Dag {
    let mut dag = Dag { nodes: Vec::new() };
    dag.nodes.push(Node {
        count: samples.len() as u32,
        split: None,
        histogram: Vec::new(),
    });
    let mut frontier = vec![(0usize, samples)];
    let mut depth = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for (idx, samples) in frontier {
            let hist = nodes::histogram(set, &samples);
            let candidates = if depth >= cfg.max_depth || nodes::is_pure(&hist) {
                Vec::new()
            } else {
                draw_candidates(rng, set, &samples, cfg.n_random_splits_per_node)
            };
            let Some(best) = best_candidate(set, &samples, &candidates, cfg.criterion) else {
                dag.nodes[idx] = Node::leaf(hist);
                continue;
            };
            let (left, right) = nodes::partition(set, &samples, best);
            let l = dag.nodes.len() as u32;
            for part in [&left, &right] {
                dag.nodes.push(Node {
                    count: part.len() as u32,
                    split: None,
                    histogram: Vec::new(),
                });
            }
            dag.nodes[idx].split = Some(Split {
                feature: best.feature,
                threshold: best.threshold,
                left: l,
                right: l + 1,
            });
            next.push((l as usize, left));
            next.push((l as usize + 1, right));
        }
        frontier = next;
        depth += 1;
    }
    dag
}

/// Candidate with the lowest weighted child impurity, first on ties.
pub(crate) fn best_candidate(
    set: &TrainingSet<'_>,
    samples: &[u32],
    candidates: &[Candidate],
    criterion: ImpurityCriterion,
) -> Option<Candidate> {
    let mut best: Option<(f64, Candidate)> = None;
    for &c in candidates {
        let (l, r) = nodes::split_histograms(set, samples, c);
        let cost = criterion.weighted(&l) + criterion.weighted(&r);
        if best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, c));
        }
    }
    best.map(|(_, c)| c)
}

impl Forest {
    pub fn fit(set: &TrainingSet<'_>, cfg: &DecisionForestConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        if set.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let trees = (0..cfg.n_trees)
            .map(|t| {
                let mut rng = member_rng(cfg.seed, t);
                let samples = bag(&mut rng, set.len(), cfg.bagging_fraction, cfg.bootstrap);
                grow_tree(set, samples, cfg, &mut rng)
            })
            .collect();
        Ok(Forest {
            n_features: set.n_cols,
            n_classes: set.n_classes,
            trees,
        })
    }
}

impl Classifier for Forest {
    fn input_width(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn scores_unchecked(&self, x: &[f64]) -> Vec<f64> {
        ensemble_scores(&self.trees, self.n_classes, x)
    }
}

pub(crate) struct DecisionForest;

impl Algorithm for DecisionForest {
    fn kind(&self) -> ModelKind {
        ModelKind::DecisionForest
    }

    fn default_encoding(&self) -> EncodingScheme {
        EncodingScheme::MIXED_MINMAX
    }

    fn default_config(&self) -> serde_json::Value {
        serde_json::to_value(DecisionForestConfig::default()).expect("config serializes")
    }

    fn train(&self, train: &EncodedMatrix, config: &serde_json::Value) -> Result<TrainedModel, ModelError> {
        let cfg: DecisionForestConfig = resolve_config(config)?;
        let model = Forest::fit(&TrainingSet::from_matrix(train), &cfg)?;
        Ok(TrainedModel::new(
            ModelParams::DecisionForest(model),
            train.encoder.clone(),
        ))
    }
}
