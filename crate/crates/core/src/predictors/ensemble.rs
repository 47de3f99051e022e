use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::Matrix;
use super::tree::{fit_tree_on, Binned, FeatureSubset, TreeModel, TreeParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            bootstrap: true,
            tree: TreeParams {
                max_features: FeatureSubset::OneThird,
                ..TreeParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel<T> {
    pub trees: Vec<TreeModel<T>>,
    pub tree_seeds: Vec<u64>,
}

impl<T: Scalar> ForestModel<T> {
    pub fn predict_row(&self, x: &[T]) -> T {
        let total: T = self.trees.iter().map(|t| t.predict_row(x)).sum();
        total / T::of_usize(self.trees.len())
    }
}

fn check_xy<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<()> {
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if x.n_rows() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 rows, got {}", x.n_rows())));
    }
    Ok(())
}

/// Bagged trees with per-split feature subsampling. Trees are fitted in
/// parallel; each has its own seed, so the result does not depend on
/// scheduling.
pub fn fit_forest<T: Scalar>(x: &Matrix<T>, y: &[T], params: &ForestParams, seed: u64) -> Result<ForestModel<T>> {
    check_xy(x, y)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidInput("forest needs at least one tree".into()));
    }
    let data = Binned::new(x)?;
    let n = x.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| rng.random()).collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let rows: Vec<u32> = if params.bootstrap {
                let mut r = ChaCha8Rng::seed_from_u64(s);
                (0..n).map(|_| r.random_range(0..n as u32)).collect()
            } else {
                (0..n as u32).collect()
            };
            fit_tree_on(&data, y, &rows, &params.tree, s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel { trees, tree_seeds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub tree: TreeParams,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            n_rounds: 100,
            learning_rate: 0.1,
            subsample: 1.0,
            tree: TreeParams {
                max_depth: Some(6),
                ..TreeParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel<T> {
    pub base: T,
    pub learning_rate: T,
    pub trees: Vec<TreeModel<T>>,
    /// Training mean squared error before the first round and after each one.
    pub loss_log: Vec<T>,
}

impl<T: Scalar> GbmModel<T> {
    pub fn predict_row(&self, x: &[T]) -> T {
        self.trees
            .iter()
            .fold(self.base, |acc, t| acc + self.learning_rate * t.predict_row(x))
    }
}

/// Squared-error gradient boosting: each round fits a tree to the current
/// residuals and adds it with shrinkage.
pub fn fit_gbm<T: Scalar>(x: &Matrix<T>, y: &[T], params: &GbmParams, seed: u64) -> Result<GbmModel<T>> {
    check_xy(x, y)?;
    if !(params.subsample > 0.0 && params.subsample <= 1.0) {
        return Err(Error::InvalidInput(format!("subsample must lie in (0, 1], got {}", params.subsample)));
    }
    let data = Binned::new(x)?;
    let n = x.n_rows();
    let nf = T::of_usize(n);
    let base = y.iter().copied().sum::<T>() / nf;
    let eta = T::of(params.learning_rate);
    let mut pred = vec![base; n];
    let mse = |pred: &[T]| y.iter().zip(pred).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / nf;
    let mut loss_log = vec![mse(&pred)];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = ((n as f64 * params.subsample).round() as usize).clamp(2, n);
    for _ in 0..params.n_rounds {
        let residual: Vec<T> = y.iter().zip(&pred).map(|(&a, &b)| a - b).collect();
        let rows: Vec<u32> = if take == n {
            (0..n as u32).collect()
        } else {
            let mut r: Vec<u32> = sample(&mut rng, n, take).into_iter().map(|i| i as u32).collect();
            r.sort_unstable();
            r
        };
        let tree = fit_tree_on(&data, &residual, &rows, &params.tree, rng.random())?;
        for (i, p) in pred.iter_mut().enumerate() {
            *p = *p + eta * tree.predict_row(x.row(i));
        }
        loss_log.push(mse(&pred));
        trees.push(tree);
    }
    Ok(GbmModel {
        base,
        learning_rate: eta,
        trees,
        loss_log,
    })
}
