//! Decision jungles: ensembles of rooted decision DAGs.
//!
//! Each DAG grows one level at a time. The nodes of the current level that
//! still need splitting each sample a pool of random candidate splits and
//! start from the one with the lowest local entropy. Their `2P` branches are
//! then assigned to `M = min(2P, max_width)` children and the level is
//! refined by alternating two steps for `optimization_passes` rounds:
//!
//! 1. for every parent, pick the candidate from its pool that minimizes the
//!    level objective given the current branch assignment;
//! 2. for every branch, move it to the child that minimizes the objective
//!    given the current splits.
//!
//! The objective is `sum over children of |S| * entropy(S)`. Steps only
//! accept strict improvements, so it never increases. When the width cap
//! never binds every branch keeps its own child and the DAG is exactly the
//! tree grown with the entropy criterion from the same random stream.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::member_rng;
use super::nodes::{self, bag, draw_candidates, ensemble_scores, weighted_entropy, Candidate, Dag, Node, Split};
use super::{
    require, resolve_config, Algorithm, Classifier, ModelError, ModelKind, ModelParams, TrainedModel, TrainingSet,
};
use crate::data::{EncodedMatrix, EncodingScheme};

const IMPROVEMENT_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionJungleConfig {
    pub n_dags: usize,
    pub max_width: usize,
    pub max_depth: usize,
    pub optimization_passes: usize,
    /// Size of each parent's pool of random candidate splits. With a single
    /// candidate the split step has nothing to choose and the level is
    /// shaped by branch assignment alone.
    pub n_random_splits_per_node: usize,
    pub bagging_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for DecisionJungleConfig {
    fn default() -> Self {
        DecisionJungleConfig {
            n_dags: 8,
            max_width: 128,
            max_depth: 32,
            optimization_passes: 2,
            n_random_splits_per_node: 1,
            bagging_fraction: 1.0,
            bootstrap: true,
            seed: 1,
        }
    }
}

impl DecisionJungleConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        require(self.n_dags > 0, "n_dags must be positive")?;
        require(self.max_width >= 2, "max_width must be at least 2")?;
        require(self.max_depth > 0, "max_depth must be positive")?;
        require(self.optimization_passes >= 1, "optimization_passes must be at least 1")?;
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

/// Level objective after initialization and after each pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub member: usize,
    pub depth: usize,
    pub objectives: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jungle {
    pub n_features: usize,
    pub n_classes: usize,
    pub dags: Vec<Dag>,
}

/// A node of the level being split. Nodes that are pure or constant in
/// every feature pass all their samples through a single branch.
struct Parent {
    node: usize,
    samples: Vec<u32>,
    candidates: Vec<Candidate>,
    /// Left and right class histograms of each candidate, or the single
    /// pass-through histogram.
    branches: Vec<[Vec<u32>; 2]>,
    chosen: usize,
}

impl Parent {
    fn passes_through(&self) -> bool {
        self.candidates.is_empty()
    }

    fn n_branches(&self) -> usize {
        if self.passes_through() {
            1
        } else {
            2
        }
    }

    fn branch(&self, side: usize) -> &[u32] {
        &self.branches[self.chosen][side]
    }
}

fn add(acc: &mut [u32], h: &[u32]) {
    acc.iter_mut().zip(h).for_each(|(a, &b)| *a += b);
}

fn sub(acc: &mut [u32], h: &[u32]) {
    acc.iter_mut().zip(h).for_each(|(a, &b)| *a -= b);
}

/// `f(a + b)` for the weighted entropy `f`.
fn merged_cost(a: &[u32], b: &[u32], scratch: &mut Vec<u32>) -> f64 {
    scratch.clear();
    scratch.extend(a.iter().zip(b).map(|(x, y)| x + y));
    weighted_entropy(scratch)
}

fn objective(children: &[Vec<u32>]) -> f64 {
    children.iter().map(|h| weighted_entropy(h)).sum()
}

/// Level state: the branches `(parent, side)` in parent order, the child
/// each one feeds, and the resulting child histograms.
struct Level {
    branches: Vec<(usize, usize)>,
    first_branch: Vec<usize>,
    assign: Vec<usize>,
    children: Vec<Vec<u32>>,
}

impl Level {
    fn initial(parents: &[Parent], max_width: usize, n_classes: usize) -> Level {
        let mut branches = Vec::new();
        let mut first_branch = Vec::with_capacity(parents.len());
        for (p, parent) in parents.iter().enumerate() {
            first_branch.push(branches.len());
            branches.extend((0..parent.n_branches()).map(|side| (p, side)));
        }
        let n_branches = branches.len();
        let width = n_branches.min(max_width);
        let mut level = Level {
            branches,
            first_branch,
            assign: vec![0; n_branches],
            children: vec![vec![0; n_classes]; width],
        };
        if width == n_branches {
            for b in 0..n_branches {
                level.assign[b] = b;
                let (p, side) = level.branches[b];
                add(&mut level.children[b], parents[p].branch(side));
            }
            return level;
        }
        // largest branches seed the children, the rest join greedily
        let hist = |b: usize| {
            let (p, side) = level.branches[b];
            parents[p].branch(side)
        };
        let mut order: Vec<usize> = (0..n_branches).collect();
        order.sort_by_key(|&b| std::cmp::Reverse(hist(b).iter().sum::<u32>()));
        let mut scratch = Vec::new();
        let mut assign = vec![0; n_branches];
        let mut children = vec![vec![0; n_classes]; width];
        for (rank, &b) in order.iter().enumerate() {
            let target = if rank < width {
                rank
            } else {
                let mut best = (f64::INFINITY, 0);
                for (c, h) in children.iter().enumerate() {
                    let delta = merged_cost(h, hist(b), &mut scratch) - weighted_entropy(h);
                    if delta < best.0 {
                        best = (delta, c);
                    }
                }
                best.1
            };
            assign[b] = target;
            add(&mut children[target], hist(b));
        }
        level.assign = assign;
        level.children = children;
        level
    }

    /// Re-chooses each splitting parent's test among its candidates.
    fn optimize_splits(&mut self, parents: &mut [Parent]) {
        let mut scratch = Vec::new();
        let mut pair = Vec::new();
        for (p, parent) in parents.iter_mut().enumerate() {
            if parent.passes_through() {
                continue;
            }
            let fb = self.first_branch[p];
            let (cl, cr) = (self.assign[fb], self.assign[fb + 1]);
            sub(&mut self.children[cl], parent.branch(0));
            sub(&mut self.children[cr], parent.branch(1));
            let (children, scratch, pair) = (&self.children, &mut scratch, &mut pair);
            let mut cost = |[l, r]: &[Vec<u32>; 2]| -> f64 {
                if cl == cr {
                    pair.clear();
                    pair.extend(l.iter().zip(r).map(|(a, b)| a + b));
                    merged_cost(&children[cl], pair, scratch)
                } else {
                    merged_cost(&children[cl], l, scratch) + merged_cost(&children[cr], r, scratch)
                }
            };
            let mut best = (cost(&parent.branches[parent.chosen]), parent.chosen);
            for (c, hists) in parent.branches.iter().enumerate() {
                let v = cost(hists);
                if v < best.0 - IMPROVEMENT_EPS {
                    best = (v, c);
                }
            }
            parent.chosen = best.1;
            add(&mut self.children[cl], parent.branch(0));
            add(&mut self.children[cr], parent.branch(1));
        }
    }

    /// Moves each branch to its best child.
    fn optimize_assignment(&mut self, parents: &[Parent]) {
        let mut scratch = Vec::new();
        for b in 0..self.assign.len() {
            let (p, side) = self.branches[b];
            let h = parents[p].branch(side);
            let current = self.assign[b];
            sub(&mut self.children[current], h);
            let delta = |c: &Vec<u32>, scratch: &mut Vec<u32>| merged_cost(c, h, scratch) - weighted_entropy(c);
            let mut best = (delta(&self.children[current], &mut scratch), current);
            for (c, child) in self.children.iter().enumerate() {
                if c != current {
                    let v = delta(child, &mut scratch);
                    if v < best.0 - IMPROVEMENT_EPS {
                        best = (v, c);
                    }
                }
            }
            self.assign[b] = best.1;
            add(&mut self.children[best.1], h);
        }
    }
}

/// Test that sends every finite input left.
fn pass_through(child: u32) -> Split {
    Split {
        feature: 0,
        threshold: f64::MAX,
        left: child,
        right: child,
    }
}

pub(crate) fn grow_dag(
    set: &TrainingSet<'_>,
    samples: Vec<u32>,
    cfg: &DecisionJungleConfig,
    rng: &mut ChaCha8Rng,
    member: usize,
    trace: &mut Vec<LevelTrace>,
) -> Dag {
    let mut dag = Dag {
        nodes: vec![Node {
            count: samples.len() as u32,
            split: None,
            histogram: Vec::new(),
        }],
    };
    let mut frontier = vec![(0usize, samples)];
    let mut depth = 0;
    loop {
        let mut parents = Vec::with_capacity(frontier.len());
        for (idx, samples) in frontier {
            let hist = nodes::histogram(set, &samples);
            let candidates = if depth >= cfg.max_depth || nodes::is_pure(&hist) {
                Vec::new()
            } else {
                draw_candidates(rng, set, &samples, cfg.n_random_splits_per_node)
            };
            let (branches, chosen) = if candidates.is_empty() {
                (vec![[hist, Vec::new()]], 0)
            } else {
                let branches: Vec<[Vec<u32>; 2]> = candidates
                    .iter()
                    .map(|&c| {
                        let (l, r) = nodes::split_histograms(set, &samples, c);
                        [l, r]
                    })
                    .collect();
                let mut chosen = (f64::INFINITY, 0);
                for (c, [l, r]) in branches.iter().enumerate() {
                    let v = weighted_entropy(l) + weighted_entropy(r);
                    if v < chosen.0 {
                        chosen = (v, c);
                    }
                }
                (branches, chosen.1)
            };
            parents.push(Parent {
                node: idx,
                samples,
                candidates,
                branches,
                chosen,
            });
        }
        if parents.iter().all(Parent::passes_through) {
            for parent in parents {
                let hist = parent.branches.into_iter().next().unwrap()[0].clone();
                dag.nodes[parent.node] = Node::leaf(hist);
            }
            break;
        }

        let mut level = Level::initial(&parents, cfg.max_width, set.n_classes);
        let mut objectives = vec![objective(&level.children)];
        for _ in 0..cfg.optimization_passes {
            level.optimize_splits(&mut parents);
            level.optimize_assignment(&parents);
            objectives.push(objective(&level.children));
        }
        trace.push(LevelTrace {
            member,
            depth,
            objectives,
        });

        // drop empty children, keep the rest in order
        let base = dag.nodes.len();
        let mut node_of = vec![usize::MAX; level.children.len()];
        let mut next: Vec<(usize, Vec<u32>)> = Vec::new();
        for (c, h) in level.children.iter().enumerate() {
            if h.iter().any(|&n| n > 0) {
                node_of[c] = base + next.len();
                next.push((node_of[c], Vec::new()));
                dag.nodes.push(Node {
                    count: h.iter().sum(),
                    split: None,
                    histogram: Vec::new(),
                });
            }
        }
        for (p, parent) in parents.into_iter().enumerate() {
            let fb = level.first_branch[p];
            if parent.passes_through() {
                let c = node_of[level.assign[fb]];
                next[c - base].1.extend(parent.samples);
                dag.nodes[parent.node].split = Some(pass_through(c as u32));
                continue;
            }
            let cand = parent.candidates[parent.chosen];
            let (left, right) = nodes::partition(set, &parent.samples, cand);
            let (cl, cr) = (node_of[level.assign[fb]], node_of[level.assign[fb + 1]]);
            next[cl - base].1.extend(left);
            next[cr - base].1.extend(right);
            dag.nodes[parent.node].split = Some(Split {
                feature: cand.feature,
                threshold: cand.threshold,
                left: cl as u32,
                right: cr as u32,
            });
        }
        frontier = next;
        depth += 1;
    }
    contract_chains(dag)
}

/// Replaces pass-through nodes whose only child is a leaf with no other
/// parent by that leaf, repeatedly, then renumbers the surviving nodes in
/// their original order.
fn contract_chains(mut dag: Dag) -> Dag {
    let n = dag.nodes.len();
    let mut in_degree = vec![0usize; n];
    for node in &dag.nodes {
        if let Some(s) = node.split {
            in_degree[s.left as usize] += 1;
            if s.right != s.left {
                in_degree[s.right as usize] += 1;
            }
        }
    }
    let mut removed = vec![false; n];
    // children always follow their parents, so a reverse sweep sees
    // contracted children first
    for i in (0..n).rev() {
        if let Some(s) = dag.nodes[i].split {
            let c = s.left as usize;
            if s.left == s.right && s.threshold == f64::MAX && dag.nodes[c].is_leaf() && in_degree[c] == 1 {
                dag.nodes[i] = dag.nodes[c].clone();
                removed[c] = true;
            }
        }
    }
    let mut new_index = vec![u32::MAX; n];
    let mut kept = 0u32;
    for i in 0..n {
        if !removed[i] {
            new_index[i] = kept;
            kept += 1;
        }
    }
    let nodes = dag
        .nodes
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !removed[*i])
        .map(|(_, mut node)| {
            if let Some(s) = node.split.as_mut() {
                s.left = new_index[s.left as usize];
                s.right = new_index[s.right as usize];
            }
            node
        })
        .collect();
    Dag { nodes }
}

impl Jungle {
    pub fn fit(set: &TrainingSet<'_>, cfg: &DecisionJungleConfig) -> Result<Self, ModelError> {
        Self::fit_with_trace(set, cfg).map(|(j, _)| j)
    }

    pub fn fit_with_trace(
        set: &TrainingSet<'_>,
        cfg: &DecisionJungleConfig,
    ) -> Result<(Self, Vec<LevelTrace>), ModelError> {
        cfg.validate()?;
        if set.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let mut trace = Vec::new();
        let dags = (0..cfg.n_dags)
            .map(|m| {
                let mut rng = member_rng(cfg.seed, m);
                let samples = bag(&mut rng, set.len(), cfg.bagging_fraction, cfg.bootstrap);
                grow_dag(set, samples, cfg, &mut rng, m, &mut trace)
            })
            .collect();
        Ok((
            Jungle {
                n_features: set.n_cols,
                n_classes: set.n_classes,
                dags,
            },
            trace,
        ))
    }

    /// Widest level over all DAGs.
    pub fn max_level_width(&self) -> usize {
        let mut widest = 0;
        for dag in &self.dags {
            let mut level = vec![0usize];
            while !level.is_empty() {
                widest = widest.max(level.len());
                let mut next: Vec<usize> = level
                    .iter()
                    .filter_map(|&i| dag.nodes[i].split)
                    .flat_map(|s| [s.left as usize, s.right as usize])
                    .collect();
                next.sort_unstable();
                next.dedup();
                level = next;
            }
        }
        widest
    }
}

impl Classifier for Jungle {
    fn input_width(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn scores_unchecked(&self, x: &[f64]) -> Vec<f64> {
        ensemble_scores(&self.dags, self.n_classes, x)
    }
}

pub(crate) struct DecisionJungle;

impl Algorithm for DecisionJungle {
    fn kind(&self) -> ModelKind {
        ModelKind::DecisionJungle
    }

    fn default_encoding(&self) -> EncodingScheme {
        EncodingScheme::MIXED_MINMAX
    }

    fn default_config(&self) -> serde_json::Value {
        serde_json::to_value(DecisionJungleConfig::default()).expect("config serializes")
    }

    fn train(&self, train: &EncodedMatrix, config: &serde_json::Value) -> Result<TrainedModel, ModelError> {
        let cfg: DecisionJungleConfig = resolve_config(config)?;
        let model = Jungle::fit(&TrainingSet::from_matrix(train), &cfg)?;
        Ok(TrainedModel::new(
            ModelParams::DecisionJungle(model),
            train.encoder.clone(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parent(left: Vec<u32>, right: Vec<u32>) -> Parent {
        Parent {
            node: 0,
            samples: Vec::new(),
            candidates: vec![Candidate {
                feature: 0,
                threshold: 0.0,
            }],
            branches: vec![[left, right]],
            chosen: 0,
        }
    }

    #[test]
    fn two_parents_forced_into_one_child() {
        let mut parents = vec![
            parent(vec![3, 0, 1], vec![0, 2, 0]),
            parent(vec![1, 1, 0], vec![0, 0, 4]),
        ];
        let mut level = Level::initial(&parents, 1, 3);
        assert_eq!(level.assign, vec![0; 4]);
        assert_eq!(level.first_branch, vec![0, 2]);
        assert_eq!(level.children, vec![vec![4, 3, 5]]);
        level.optimize_splits(&mut parents);
        level.optimize_assignment(&parents);
        assert_eq!(level.children, vec![vec![4, 3, 5]]);
    }

    #[test]
    fn uncapped_level_keeps_branches_apart() {
        let parents = vec![
            parent(vec![3, 0, 1], vec![0, 2, 0]),
            parent(vec![1, 1, 0], vec![0, 0, 4]),
        ];
        let mut level = Level::initial(&parents, 8, 3);
        assert_eq!(level.assign, vec![0, 1, 2, 3]);
        let before = objective(&level.children);
        level.optimize_assignment(&parents);
        assert_eq!(level.assign, vec![0, 1, 2, 3]);
        assert_eq!(objective(&level.children), before);
    }

    #[test]
    fn capped_level_merges_similar_branches() {
        // branch 1 and 3 are both pure class 1: merging them costs nothing
        let parents = vec![
            parent(vec![5, 0, 0], vec![0, 2, 0]),
            parent(vec![0, 0, 6], vec![0, 1, 0]),
        ];
        let mut level = Level::initial(&parents, 3, 3);
        let start = objective(&level.children);
        level.optimize_assignment(&parents);
        assert!(objective(&level.children) <= start);
        assert_eq!(level.assign[1], level.assign[3]);
        assert_eq!(objective(&level.children), 0.0);
    }
}
