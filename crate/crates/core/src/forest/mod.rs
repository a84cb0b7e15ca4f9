//! Random forest regression: bagged CART trees averaged into one estimate.

mod config;
pub mod split;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    default_mtry, practical_subsample_size, ForestConfig, ForestParams, Resampling, SubsampleRule,
    DEFAULT_SUBSAMPLE_FRACTION,
};
pub use split::{best_cut, evaluate_cut, SplitCandidate};
pub use tree::{build_tree, draw_subsample, Node, Tree};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const FORMAT_VERSION: u32 = 1;

/// An immutable fitted forest.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    config: ForestConfig,
    trees: Vec<Tree>,
}

/// Seed of tree `j` under `master_seed`.
pub fn tree_seed(master_seed: u64, j: usize) -> u64 {
    derive_seed(master_seed, j as u64)
}

/// Fits `config.num_trees` trees. Trees are built in parallel but each owns an
/// independent seeded stream, so the result does not depend on thread count.
pub fn build_forest(data: &Dataset, config: &ForestConfig) -> Result<Forest> {
    config.validate(data.n_rows(), data.n_features())?;
    let trees = (0..config.num_trees)
        .into_par_iter()
        .map(|j| build_tree(data, config, tree_seed(config.master_seed, j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { config: config.clone(), trees })
}

impl Forest {
    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn subsample_size(&self) -> usize {
        self.config.subsample_size
    }

    /// Average of the per-tree predictions at `x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict_rows(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows()).into_par_iter().map(|i| self.predict(data.row(i))).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ForestDocRef {
            format_version: FORMAT_VERSION,
            config: &self.config,
            trees: &self.trees,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ForestDoc = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::input(format!(
                "unsupported forest format_version {} (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        if doc.trees.len() != doc.config.num_trees {
            return Err(Error::input("tree count does not match config.num_trees"));
        }
        for tree in &doc.trees {
            tree.check_structure(None)?;
        }
        Ok(Self { config: doc.config, trees: doc.trees })
    }
}

#[derive(Serialize)]
struct ForestDocRef<'a> {
    format_version: u32,
    config: &'a ForestConfig,
    trees: &'a [Tree],
}

#[derive(Deserialize)]
struct ForestDoc {
    format_version: u32,
    config: ForestConfig,
    trees: Vec<Tree>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * 0.37).fract(), (i as f64 * 0.61).fract()]).collect();
        let y = rows.iter().map(|r| r[0] * 3.0 - r[1]).collect();
        Dataset::from_rows(rows, y).unwrap()
    }

    fn cfg(m: usize) -> ForestConfig {
        ForestParams { num_trees: m, master_seed: 17, ..Default::default() }.resolve(12, 2).unwrap()
    }

    #[test]
    fn single_tree_forest_predicts_like_its_tree() {
        let d = toy();
        let f = build_forest(&d, &cfg(1)).unwrap();
        for i in 0..d.n_rows() {
            assert_eq!(f.predict(d.row(i)), f.trees()[0].predict(d.row(i)));
        }
    }

    #[test]
    fn constant_response_everywhere() {
        let d = toy().with_response(vec![2.5; 12]).unwrap();
        let f = build_forest(&d, &cfg(20)).unwrap();
        for t in f.trees() {
            assert_eq!(t.nodes.len(), 1);
            assert_eq!(t.leaf(0).0, 2.5);
        }
        assert_eq!(f.predict(&[0.3, 0.9]), 2.5);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let d = toy();
        let f = build_forest(&d, &cfg(25)).unwrap();
        let text = f.to_json().unwrap();
        let back = Forest::from_json(&text).unwrap();
        assert_eq!(back, f);
        for i in 0..d.n_rows() {
            assert_eq!(back.predict(d.row(i)).to_bits(), f.predict(d.row(i)).to_bits());
        }
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn rejects_other_versions() {
        let f = build_forest(&toy(), &cfg(2)).unwrap();
        let text = f.to_json().unwrap().replace("\"format_version\":1", "\"format_version\":9");
        assert!(matches!(Forest::from_json(&text), Err(Error::Input(_))));
    }
}
