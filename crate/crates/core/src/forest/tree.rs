//! Single regression trees grown level by level on a subsample.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ForestConfig, Resampling};
use super::split::{best_cut, response_constant};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::json::serialize_f64;
use crate::rng::{stream, StreamRng};

/// A tree node. Children are indices into [`Tree::nodes`], which is stored in
/// preorder with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        #[serde(serialize_with = "serialize_f64")]
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Mean response over `members`.
        #[serde(serialize_with = "serialize_f64")]
        value: f64,
        /// In-bag rows in this leaf, ascending, repeated by multiplicity.
        members: Vec<usize>,
    },
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub seed: u64,
    /// Subsample rows, ascending, repeated by multiplicity.
    pub inbag: Vec<usize>,
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] < *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return at,
            }
        }
    }

    /// `(value, members)` of the leaf at `idx`.
    ///
    /// # Panics
    /// If `idx` is not a leaf.
    pub fn leaf(&self, idx: usize) -> (f64, &[usize]) {
        match &self.nodes[idx] {
            Node::Leaf { value, members } => (*value, members),
            Node::Split { .. } => panic!("node {idx} is not a leaf"),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.leaf(self.leaf_index(x)).0
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Leaf node indices in preorder.
    pub fn leaf_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_leaf()).map(|(k, _)| k)
    }

    /// Number of times each of the `n` rows was drawn into the subsample.
    pub fn inbag_counts(&self, n: usize) -> Vec<u32> {
        let mut counts = vec![0u32; n];
        for &i in &self.inbag {
            counts[i] += 1;
        }
        counts
    }

    pub(crate) fn check_structure(&self, n_features: Option<usize>) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::input("tree without nodes"));
        }
        for (k, node) in self.nodes.iter().enumerate() {
            if let Node::Split { feature, left, right, .. } = node {
                if *left <= k || *right <= k || *left >= self.nodes.len() || *right >= self.nodes.len() {
                    return Err(Error::input(format!("node {k} has out-of-order child indices")));
                }
                if n_features.is_some_and(|p| *feature >= p) {
                    return Err(Error::input(format!("node {k} splits on unknown feature {feature}")));
                }
            }
        }
        Ok(())
    }
}

/// Draws the subsample for one tree from `rng`, sorted ascending.
pub(crate) fn draw_subsample_with(rng: &mut StreamRng, n: usize, config: &ForestConfig) -> Result<Vec<usize>> {
    let a = config.subsample_size;
    let mut rows = match config.resampling {
        Resampling::WithoutReplacement => {
            if a > n {
                return Err(Error::config(format!("subsample_size {a} exceeds n = {n} without replacement")));
            }
            index::sample(rng, n, a).into_vec()
        }
        Resampling::WithReplacement => (0..a).map(|_| rng.random_range(0..n)).collect(),
    };
    rows.sort_unstable();
    Ok(rows)
}

/// The subsample a tree seeded with `tree_seed` is grown on.
pub fn draw_subsample(n: usize, config: &ForestConfig, tree_seed: u64) -> Result<Vec<usize>> {
    draw_subsample_with(&mut stream(tree_seed), n, config)
}

enum Proto {
    Leaf(Vec<usize>),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Grows one tree: draw the subsample, then expand cells level by level, each
/// expansion drawing a fresh set of `mtry` candidate features, until the leaf
/// budget is spent or no cell can be split.
pub fn build_tree(data: &Dataset, config: &ForestConfig, tree_seed: u64) -> Result<Tree> {
    let n = data.n_rows();
    let p = data.n_features();
    config.validate(n, p)?;
    let mut rng = stream(tree_seed);
    let inbag = draw_subsample_with(&mut rng, n, config)?;

    let mut protos = vec![Proto::Leaf(inbag.clone())];
    let mut level = vec![0usize];
    let mut leaves = 1usize;
    while !level.is_empty() && leaves < config.max_leaves {
        let mut next = Vec::with_capacity(2 * level.len());
        for &id in &level {
            if leaves >= config.max_leaves {
                break;
            }
            let Proto::Leaf(members) = &protos[id] else { unreachable!("level holds leaves only") };
            if members.len() < 2 * config.min_leaf_size || response_constant(data, members) {
                continue;
            }
            let mut features = index::sample(&mut rng, p, config.mtry).into_vec();
            features.sort_unstable();
            let Some(cut) = best_cut(data, members, &features, config.min_leaf_size) else {
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) =
                members.iter().partition(|&&i| data.value(i, cut.feature) < cut.threshold);
            let l = protos.len();
            protos.push(Proto::Leaf(left));
            protos.push(Proto::Leaf(right));
            protos[id] = Proto::Split { feature: cut.feature, threshold: cut.threshold, left: l, right: l + 1 };
            next.extend([l, l + 1]);
            leaves += 1;
        }
        level = next;
    }

    let nodes = to_preorder(protos, data.response());
    Ok(Tree { seed: tree_seed, inbag, nodes })
}

fn to_preorder(mut protos: Vec<Proto>, y: &[f64]) -> Vec<Node> {
    let mut nodes: Vec<Node> = Vec::with_capacity(protos.len());
    // (proto id, slot in parent to patch)
    let mut stack: Vec<(usize, Option<(usize, bool)>)> = vec![(0, None)];
    while let Some((id, parent)) = stack.pop() {
        let at = nodes.len();
        if let Some((pi, is_left)) = parent {
            if let Node::Split { left, right, .. } = &mut nodes[pi] {
                if is_left {
                    *left = at;
                } else {
                    *right = at;
                }
            }
        }
        match std::mem::replace(&mut protos[id], Proto::Leaf(Vec::new())) {
            Proto::Leaf(members) => {
                let value = members.iter().map(|&i| y[i]).sum::<f64>() / members.len() as f64;
                nodes.push(Node::Leaf { value, members });
            }
            Proto::Split { feature, threshold, left, right } => {
                nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
                stack.push((right, Some((at, false))));
                stack.push((left, Some((at, true))));
            }
        }
    }
    nodes
}
