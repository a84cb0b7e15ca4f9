#![allow(dead_code)]

use oobvar::forest::{ForestParams, Resampling, SubsampleRule, Tree};
use oobvar::{build_forest, Dataset, Forest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform features, response a smooth signal plus noise.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| r.random::<f64>()).collect()).collect();
    let y = rows.iter().map(|x| (5.0 * x[0]).sin() + x.iter().sum::<f64>() + 0.3 * r.random::<f64>()).collect();
    Dataset::from_rows(rows, y).unwrap()
}

pub fn fit(data: &Dataset, params: ForestParams) -> Forest {
    let cfg = params.resolve(data.n_rows(), data.n_features()).unwrap();
    build_forest(data, &cfg).unwrap()
}

pub fn params(trees: usize, seed: u64) -> ForestParams {
    ForestParams { num_trees: trees, master_seed: seed, ..Default::default() }
}

/// Random small forest configuration for property checks.
pub fn random_params(r: &mut ChaCha8Rng, n: usize, p: usize) -> ForestParams {
    let with_repl = r.random_bool(0.3);
    let a = r.random_range(2..=n.saturating_sub(1).max(2));
    ForestParams {
        num_trees: r.random_range(20..=300),
        mtry: Some(r.random_range(1..=p)),
        subsample: Some(SubsampleRule::Size(a)),
        max_leaves: Some(r.random_range(1..=a)),
        min_leaf_size: r.random_range(1..=2),
        resampling: if with_repl { Resampling::WithReplacement } else { Resampling::WithoutReplacement },
        master_seed: r.random(),
    }
}

/// Dense row of weights a forest's trees put on training rows when predicting
/// at `x`, found by scanning every in-bag row for leaf co-membership.
pub fn tree_weight_row(tree: &Tree, data: &Dataset, x: &[f64]) -> Vec<f64> {
    let target = tree.leaf_index(x);
    let mut row = vec![0.0; data.n_rows()];
    let in_leaf: Vec<usize> = tree.inbag.iter().copied().filter(|&j| tree.leaf_index(data.row(j)) == target).collect();
    for &j in &in_leaf {
        row[j] += 1.0 / in_leaf.len() as f64;
    }
    row
}

/// Dense OOB weight matrix built from [`tree_weight_row`].
pub fn dense_oob_weights(forest: &Forest, data: &Dataset) -> Vec<Option<Vec<f64>>> {
    (0..data.n_rows())
        .map(|i| {
            let oob: Vec<&Tree> = forest.trees().iter().filter(|t| !t.inbag.contains(&i)).collect();
            if oob.is_empty() {
                return None;
            }
            let mut row = vec![0.0; data.n_rows()];
            for t in &oob {
                for (acc, w) in row.iter_mut().zip(tree_weight_row(t, data, data.row(i))) {
                    *acc += w;
                }
            }
            Some(row.into_iter().map(|w| w / oob.len() as f64).collect())
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
