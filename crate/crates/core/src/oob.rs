//! Out-of-bag prediction, by tree traversal and as an explicit linear smoother.
//!
//! Row `i`'s OOB trees are the trees whose subsample does not contain `i`. The
//! OOB prediction averages those trees' leaf values at `X_i`; equivalently it
//! is `sum_j W[i][j] * y_j`, where a tree contributes `c_j / N_leaf` to
//! `W[i][j]` for every in-bag co-member `j` of `X_i`'s leaf (`c_j` being the
//! multiplicity of `j` in that leaf) and contributions are averaged over the
//! OOB trees.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::Result;
use crate::forest::{Forest, Resampling, Tree};
use crate::json::fmt_f64_cell;

/// How often each row was out of bag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OobCoverage {
    /// `Z_i`: number of trees with row `i` out of bag.
    pub z_counts: Vec<usize>,
    /// Probability that a given row is out of bag for one tree.
    pub p_n_theoretical: f64,
    /// Rows with `Z_i = 0`.
    pub uncovered: Vec<usize>,
    pub num_trees: usize,
}

impl OobCoverage {
    pub fn n_covered(&self) -> usize {
        self.z_counts.len() - self.uncovered.len()
    }

    /// `mean_i Z_i / M`.
    pub fn mean_fraction(&self) -> f64 {
        let total: usize = self.z_counts.iter().sum();
        total as f64 / (self.z_counts.len() as f64 * self.num_trees as f64)
    }
}

/// Probability that a fixed row is left out of one tree's subsample:
/// `1 - a/n` without replacement and `(1 - 1/n)^a` with replacement.
pub fn oob_probability(n: usize, subsample_size: usize, resampling: Resampling) -> f64 {
    match resampling {
        Resampling::WithoutReplacement => 1.0 - subsample_size as f64 / n as f64,
        Resampling::WithReplacement => (1.0 - 1.0 / n as f64).powi(subsample_size as i32),
    }
}

/// Exact OOB counts from the stored subsamples of a forest fitted on `n` rows.
pub fn oob_coverage(forest: &Forest, n: usize) -> OobCoverage {
    let mut inbag_trees = vec![0usize; n];
    for tree in forest.trees() {
        let mut last = None;
        for &i in &tree.inbag {
            if last != Some(i) {
                inbag_trees[i] += 1;
                last = Some(i);
            }
        }
    }
    let m = forest.num_trees();
    let z_counts: Vec<usize> = inbag_trees.iter().map(|&k| m - k).collect();
    let uncovered = z_counts.iter().enumerate().filter(|(_, &z)| z == 0).map(|(i, _)| i).collect();
    let cfg = forest.config();
    OobCoverage {
        z_counts,
        p_n_theoretical: oob_probability(n, cfg.subsample_size, cfg.resampling),
        uncovered,
        num_trees: m,
    }
}

fn is_inbag(tree: &Tree, i: usize) -> bool {
    tree.inbag.binary_search(&i).is_ok()
}

/// OOB prediction for row `i` by traversing its OOB trees; `None` if `Z_i = 0`.
pub fn oob_predict_traversal(forest: &Forest, data: &Dataset, i: usize) -> Option<f64> {
    let x = data.row(i);
    let (sum, count) = forest
        .trees()
        .iter()
        .filter(|t| !is_inbag(t, i))
        .fold((0.0, 0usize), |(s, c), t| (s + t.predict(x), c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// For every training row, the `(tree, leaf)` pairs of its OOB trees in tree order.
#[derive(Debug, Clone)]
pub struct OobRouting {
    rows: Vec<Vec<(u32, u32)>>,
}

impl OobRouting {
    pub fn new(forest: &Forest, data: &Dataset) -> Self {
        let n = data.n_rows();
        let masks: Vec<Vec<u32>> = forest.trees().par_iter().map(|t| t.inbag_counts(n)).collect();
        let rows = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = data.row(i);
                forest
                    .trees()
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| masks[*t][i] == 0)
                    .map(|(t, tree)| (t as u32, tree.leaf_index(x) as u32))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn z(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    pub fn covered(&self, i: usize) -> bool {
        !self.rows[i].is_empty()
    }

    /// OOB average of `leaf_value(tree, leaf)` for every row.
    pub fn average<F>(&self, leaf_value: F) -> Vec<Option<f64>>
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        self.rows
            .par_iter()
            .map(|pairs| {
                (!pairs.is_empty()).then(|| {
                    pairs.iter().map(|&(t, l)| leaf_value(t as usize, l as usize)).sum::<f64>() / pairs.len() as f64
                })
            })
            .collect()
    }
}

/// OOB predictions for all rows; `None` marks uncovered rows.
pub fn oob_predictions(forest: &Forest, data: &Dataset) -> Vec<Option<f64>> {
    oob_predictions_routed(forest, &OobRouting::new(forest, data))
}

pub fn oob_predictions_routed(forest: &Forest, routing: &OobRouting) -> Vec<Option<f64>> {
    let trees = forest.trees();
    routing.average(|t, l| trees[t].leaf(l).0)
}

/// OOB predictions after replacing every leaf value by the mean of `y_star`
/// over that leaf's in-bag members, keeping all tree structures fixed.
pub fn refit_by_substitution(forest: &Forest, routing: &OobRouting, y_star: &[f64]) -> Vec<Option<f64>> {
    let substituted: Vec<Vec<f64>> = forest
        .trees()
        .iter()
        .map(|tree| {
            tree.nodes
                .iter()
                .map(|node| match node {
                    crate::forest::Node::Leaf { members, .. } => {
                        members.iter().map(|&j| y_star[j]).sum::<f64>() / members.len() as f64
                    }
                    crate::forest::Node::Split { .. } => f64::NAN,
                })
                .collect()
        })
        .collect();
    routing.average(|t, l| substituted[t][l])
}

/// Weights one tree assigns to training rows when predicting at `x`:
/// `(j, c_j / N_leaf)` over the distinct in-bag members of `x`'s leaf.
pub fn tree_weights(tree: &Tree, x: &[f64]) -> Vec<(usize, f64)> {
    let (_, members) = tree.leaf(tree.leaf_index(x));
    let inv = 1.0 / members.len() as f64;
    let mut out: Vec<(usize, f64)> = Vec::new();
    for &j in members {
        match out.last_mut() {
            Some((last, w)) if *last == j => *w += inv,
            _ => out.push((j, inv)),
        }
    }
    out
}

/// Sparse row-stochastic matrix of OOB weights.
#[derive(Debug, Clone, PartialEq)]
pub struct OobWeightMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    covered: Vec<bool>,
}

/// Assembles the OOB weight matrix. Per row, tree contributions are summed in
/// tree order before dividing by `Z_i`, so the result is bit-reproducible.
pub fn oob_weight_matrix(forest: &Forest, data: &Dataset) -> OobWeightMatrix {
    oob_weight_matrix_routed(forest, &OobRouting::new(forest, data))
}

pub fn oob_weight_matrix_routed(forest: &Forest, routing: &OobRouting) -> OobWeightMatrix {
    let n = routing.n_rows();
    let trees = forest.trees();
    let rows: Vec<Vec<(usize, f64)>> = routing
        .rows
        .par_iter()
        .map_init(
            || (vec![0.0f64; n], Vec::<usize>::new()),
            |(acc, touched), pairs| {
                for &(t, l) in pairs {
                    let (_, members) = trees[t as usize].leaf(l as usize);
                    let inv = 1.0 / members.len() as f64;
                    for &j in members {
                        if acc[j] == 0.0 {
                            touched.push(j);
                        }
                        acc[j] += inv;
                    }
                }
                touched.sort_unstable();
                let z = pairs.len() as f64;
                let row = touched.iter().map(|&j| (j, acc[j] / z)).collect();
                for &j in touched.iter() {
                    acc[j] = 0.0;
                }
                touched.clear();
                row
            },
        )
        .collect();
    let covered = routing.rows.iter().map(|r| !r.is_empty()).collect();
    OobWeightMatrix { n, rows, covered }
}

impl OobWeightMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Nonzero `(j, W[i][j])` pairs of row `i`, ascending in `j`.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn covered(&self) -> &[bool] {
        &self.covered
    }

    pub fn is_covered(&self, i: usize) -> bool {
        self.covered[i]
    }

    pub fn n_covered(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].binary_search_by_key(&j, |&(k, _)| k).map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, w)| w).sum()
    }

    /// `sum_j W[i][j]^2`.
    pub fn row_sum_squares(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, w)| w * w).sum()
    }

    /// `(W v)_i`.
    pub fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, w)| w * v[j]).sum()
    }

    /// `W v`, `None` on uncovered rows.
    pub fn apply(&self, v: &[f64]) -> Vec<Option<f64>> {
        (0..self.n).map(|i| self.covered[i].then(|| self.row_dot(i, v))).collect()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Dense copy, only offered for `n <= 2000`.
    pub fn to_dense(&self) -> Option<Vec<Vec<f64>>> {
        (self.n <= 2000).then(|| {
            self.rows
                .iter()
                .map(|r| {
                    let mut d = vec![0.0; self.n];
                    for &(j, w) in r {
                        d[j] = w;
                    }
                    d
                })
                .collect()
        })
    }

    /// Writes `i,j,weight` rows in ascending `(i, j)` order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "weight"])?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, weight) in row {
                w.write_record([i.to_string(), j.to_string(), fmt_f64_cell(weight)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
