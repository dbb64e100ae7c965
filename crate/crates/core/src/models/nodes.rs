//! Node storage shared by decision trees and decision DAGs, and the random
//! split sampling both builders use.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TrainingSet;

/// Axis-aligned test: rows with `x[feature] <= threshold` go left.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Training samples that reached this node.
    pub count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Class counts; only leaves keep them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub histogram: Vec<u32>,
}

impl Node {
    pub(crate) fn leaf(histogram: Vec<u32>) -> Self {
        Node {
            count: histogram.iter().sum(),
            split: None,
            histogram,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// A rooted decision graph, nodes in level order with the root at index 0.
/// A tree is the special case where every node has at most one parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dag {
    pub nodes: Vec<Node>,
}

impl Dag {
    pub fn leaf_for(&self, x: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while let Some(s) = node.split {
            let next = if x[s.feature] <= s.threshold { s.left } else { s.right };
            node = &self.nodes[next as usize];
        }
        node
    }

    /// Adds the leaf's class distribution to `acc`.
    pub(crate) fn accumulate(&self, x: &[f64], acc: &mut [f64]) {
        let leaf = self.leaf_for(x);
        let n = leaf.count.max(1) as f64;
        for (a, &c) in acc.iter_mut().zip(&leaf.histogram) {
            *a += c as f64 / n;
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for i in 0..self.nodes.len() {
            if let Some(s) = self.nodes[i].split {
                for c in [s.left, s.right] {
                    depth[c as usize] = depth[c as usize].max(depth[i] + 1);
                    max = max.max(depth[c as usize]);
                }
            }
        }
        max
    }
}

/// Mean of the per-member leaf distributions.
pub(crate) fn ensemble_scores(members: &[Dag], n_classes: usize, x: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; n_classes];
    for m in members {
        m.accumulate(x, &mut acc);
    }
    let n = members.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub(crate) struct Candidate {
    pub feature: usize,
    pub threshold: f64,
}

pub(crate) fn goes_left(set: &TrainingSet<'_>, sample: u32, c: Candidate) -> bool {
    set.row(sample as usize)[c.feature] <= c.threshold
}

pub(crate) fn histogram(set: &TrainingSet<'_>, samples: &[u32]) -> Vec<u32> {
    let mut h = vec![0u32; set.n_classes];
    for &s in samples {
        h[set.labels[s as usize]] += 1;
    }
    h
}

pub(crate) fn split_histograms(set: &TrainingSet<'_>, samples: &[u32], c: Candidate) -> (Vec<u32>, Vec<u32>) {
    let mut left = vec![0u32; set.n_classes];
    let mut right = vec![0u32; set.n_classes];
    for &s in samples {
        let h = if goes_left(set, s, c) { &mut left } else { &mut right };
        h[set.labels[s as usize]] += 1;
    }
    (left, right)
}

pub(crate) fn partition(set: &TrainingSet<'_>, samples: &[u32], c: Candidate) -> (Vec<u32>, Vec<u32>) {
    samples.iter().partition(|&&s| goes_left(set, s, c))
}

pub(crate) fn is_pure(h: &[u32]) -> bool {
    h.iter().filter(|&&c| c > 0).count() <= 1
}

/// `|S| * gini(S)`.
pub(crate) fn weighted_gini(h: &[u32]) -> f64 {
    let n: u64 = h.iter().map(|&c| c as u64).sum();
    if n == 0 {
        return 0.0;
    }
    let sq: u64 = h.iter().map(|&c| c as u64 * c as u64).sum();
    n as f64 - sq as f64 / n as f64
}

/// `|S| * entropy(S)` in nats.
pub(crate) fn weighted_entropy(h: &[u32]) -> f64 {
    let n: u32 = h.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let mut acc = nf * nf.ln();
    for &c in h {
        if c > 0 {
            let cf = c as f64;
            acc -= cf * cf.ln();
        }
    }
    acc.max(0.0)
}

/// Draws `n` random (feature, threshold) pairs among the features that vary
/// within `samples`. Thresholds are uniform in `[min, max)`, so both sides
/// of every candidate are non-empty. Empty when no feature varies.
pub(crate) fn draw_candidates<R: Rng>(rng: &mut R, set: &TrainingSet<'_>, samples: &[u32], n: usize) -> Vec<Candidate> {
    let d = set.n_cols;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &s in samples {
        for (j, &v) in set.row(s as usize).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let varying: Vec<usize> = (0..d).filter(|&j| hi[j] > lo[j]).collect();
    if varying.is_empty() {
        return Vec::new();
    }
    (0..n)
        .map(|_| {
            let feature = varying[rng.gen_range(0..varying.len())];
            let u: f64 = rng.gen();
            let mut threshold = lo[feature] + u * (hi[feature] - lo[feature]);
            if threshold >= hi[feature] {
                threshold = lo[feature];
            }
            Candidate { feature, threshold }
        })
        .collect()
}

/// Sample indices for one ensemble member.
pub(crate) fn bag<R: Rng>(rng: &mut R, n: usize, fraction: f64, with_replacement: bool) -> Vec<u32> {
    let m = ((n as f64 * fraction).round() as usize).clamp(1, if with_replacement { usize::MAX } else { n });
    if with_replacement {
        let mut v: Vec<u32> = (0..m).map(|_| rng.gen_range(0..n) as u32).collect();
        v.sort_unstable();
        v
    } else if m == n {
        (0..n as u32).collect()
    } else {
        let mut v: Vec<u32> = index::sample(rng, n, m).into_iter().map(|i| i as u32).collect();
        v.sort_unstable();
        v
    }
}

/// Routes `samples` through `dag` and checks the count invariants: an
/// internal node's count equals the flow out of its two branches, every
/// node's count equals the flow into it, and leaf histograms total their
/// counts.
pub fn check_counts(dag: &Dag, set: &TrainingSet<'_>, samples: &[u32]) -> Result<(), String> {
    let n = dag.nodes.len();
    let mut out_flow = vec![0u32; n];
    let mut in_flow = vec![0u32; n];
    in_flow[0] = samples.len() as u32;
    for &s in samples {
        let x = set.row(s as usize);
        let mut i = 0usize;
        while let Some(sp) = dag.nodes[i].split {
            let next = if x[sp.feature] <= sp.threshold {
                sp.left
            } else {
                sp.right
            } as usize;
            out_flow[i] += 1;
            in_flow[next] += 1;
            i = next;
        }
    }
    for (i, node) in dag.nodes.iter().enumerate() {
        if node.count != in_flow[i] {
            return Err(format!(
                "node {i}: stored count {} but {} samples flow in",
                node.count, in_flow[i]
            ));
        }
        if node.is_leaf() {
            if node.histogram.iter().sum::<u32>() != node.count {
                return Err(format!("leaf {i}: histogram total differs from count"));
            }
        } else if out_flow[i] != node.count {
            return Err(format!(
                "node {i}: {} samples leave through its branches, count is {}",
                out_flow[i], node.count
            ));
        }
    }
    Ok(())
}
