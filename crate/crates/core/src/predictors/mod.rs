//! In-house regressors: CART tree, random forest and gradient boosting, all
//! generic over the scalar type.

mod encode;
mod ensemble;
mod tree;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use encode::{encode, targets, EncodedMatrix, Encoding, FeatureKind, FeatureMeta, Matrix, FEATURE_NAMES};
pub use ensemble::{fit_forest, fit_gbm, ForestModel, ForestParams, GbmModel, GbmParams};
pub use tree::{fit_tree, fit_tree_on, Binned, FeatureSubset, Node, TreeModel, TreeParams};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

/// Normalized importances; all zero when the model never split.
#[derive(Debug, Clone, PartialEq)]
pub struct Importances<T> {
    pub weights: Vec<T>,
}

impl<T: Scalar> Importances<T> {
    pub fn from_raw(raw: Vec<T>) -> Self {
        let total: T = raw.iter().copied().sum();
        let weights = if total > T::zero() {
            raw.iter().map(|&v| v / total).collect()
        } else {
            vec![T::zero(); raw.len()]
        };
        Importances { weights }
    }

    pub fn has_splits(&self) -> bool {
        self.weights.iter().any(|&w| w > T::zero())
    }

    /// `name,importance` rows.
    pub fn write_csv<W: Write>(&self, names: &[&str], sink: W) -> Result<()> {
        if names.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: names.len(),
            });
        }
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["feature", "importance"])?;
        for (n, v) in names.iter().zip(&self.weights) {
            w.write_record([n.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("writing importances", e))?;
        Ok(())
    }
}

fn mean_raw<T: Scalar>(trees: &[TreeModel<T>], d: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); d];
    for t in trees {
        for (a, &v) in acc.iter_mut().zip(&t.raw_importances) {
            *a = *a + v;
        }
    }
    let k = T::of_usize(trees.len().max(1));
    acc.into_iter().map(|v| v / k).collect()
}

pub trait Regressor<T: Scalar> {
    fn n_features(&self) -> usize;

    fn predict_row(&self, x: &[T]) -> T;

    /// Per-feature SSE reduction over the training size, averaged across
    /// trees for ensembles.
    fn raw_importances(&self) -> Vec<T>;

    fn predict(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    fn feature_importances(&self) -> Importances<T> {
        Importances::from_raw(self.raw_importances())
    }
}

impl<T: Scalar> Regressor<T> for TreeModel<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[T]) -> T {
        TreeModel::predict_row(self, x)
    }

    fn raw_importances(&self) -> Vec<T> {
        self.raw_importances.clone()
    }
}

impl<T: Scalar> Regressor<T> for ForestModel<T> {
    fn n_features(&self) -> usize {
        self.trees[0].n_features
    }

    fn predict_row(&self, x: &[T]) -> T {
        ForestModel::predict_row(self, x)
    }

    fn raw_importances(&self) -> Vec<T> {
        mean_raw(&self.trees, self.n_features())
    }
}

impl<T: Scalar> Regressor<T> for GbmModel<T> {
    fn n_features(&self) -> usize {
        self.trees.first().map_or(usize::MAX, |t| t.n_features)
    }

    fn predict_row(&self, x: &[T]) -> T {
        GbmModel::predict_row(self, x)
    }

    fn raw_importances(&self) -> Vec<T> {
        let d = self.trees.first().map_or(0, |t| t.n_features);
        mean_raw(&self.trees, d)
    }

    fn predict(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        if let Some(t) = self.trees.first() {
            if x.n_cols() != t.n_features {
                return Err(Error::DimensionMismatch {
                    expected: t.n_features,
                    actual: x.n_cols(),
                });
            }
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

/// A model family with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Tree(TreeParams),
    Forest(ForestParams),
    Gbm(GbmParams),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Forest(_) => "forest",
            ModelSpec::Gbm(_) => "gbm",
        }
    }

    /// Tree, forest and gbm with default parameters.
    pub fn default_roster() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Tree(TreeParams::default()),
            ModelSpec::Forest(ForestParams::default()),
            ModelSpec::Gbm(GbmParams::default()),
        ]
    }

    pub fn fit<T: Scalar>(&self, x: &Matrix<T>, y: &[T], seed: u64) -> Result<FittedModel<T>> {
        Ok(match self {
            ModelSpec::Tree(p) => FittedModel::Tree(fit_tree(x, y, p, seed)?),
            ModelSpec::Forest(p) => FittedModel::Forest(fit_forest(x, y, p, seed)?),
            ModelSpec::Gbm(p) => FittedModel::Gbm(fit_gbm(x, y, p, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel<T> {
    Tree(TreeModel<T>),
    Forest(ForestModel<T>),
    Gbm(GbmModel<T>),
}

impl<T: Scalar> FittedModel<T> {
    fn inner(&self) -> &dyn Regressor<T> {
        match self {
            FittedModel::Tree(m) => m,
            FittedModel::Forest(m) => m,
            FittedModel::Gbm(m) => m,
        }
    }

    pub fn save<W: Write>(&self, sink: W) -> Result<()> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            format_version: u32,
            model: &'a FittedModel<T>,
        }
        serde_json::to_writer(
            sink,
            &Envelope {
                format_version: FORMAT_VERSION,
                model: self,
            },
        )?;
        Ok(())
    }

    pub fn load<R: Read>(source: R) -> Result<Self> {
        let mut value: serde_json::Value = serde_json::from_reader(source)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found,
                expected: FORMAT_VERSION,
            });
        }
        let model = value
            .get_mut("model")
            .map(serde_json::Value::take)
            .ok_or_else(|| Error::InvalidInput("model field missing".into()))?;
        Ok(serde_json::from_value(model)?)
    }
}

impl<T: Scalar> Regressor<T> for FittedModel<T> {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_row(&self, x: &[T]) -> T {
        self.inner().predict_row(x)
    }

    fn raw_importances(&self) -> Vec<T> {
        self.inner().raw_importances()
    }

    fn predict(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        self.inner().predict(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(n: usize, seed: u64) -> (Matrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(0..50) as f64).collect())
            .collect();
        let y = rows
            .iter()
            .map(|r| (r[0] / 8.0).sin() * 10.0 + r[1] * 0.3 + rng.random_range(-6.0..6.0))
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn rmse(a: &[f64], b: &[f64]) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn single_unbagged_full_feature_forest_is_a_tree() {
        let (x, y) = noisy(300, 1);
        let tp = TreeParams::default();
        let forest = fit_forest(
            &x,
            &y,
            &ForestParams {
                n_trees: 1,
                bootstrap: false,
                tree: tp.clone(),
            },
            5,
        )
        .unwrap();
        let tree = fit_tree(&x, &y, &tp, 0).unwrap();
        assert_eq!(forest.predict(&x).unwrap(), tree.predict(&x).unwrap());
    }

    #[test]
    fn seeded_fits_are_identical() {
        let (x, y) = noisy(300, 2);
        let p = ForestParams {
            n_trees: 10,
            ..ForestParams::default()
        };
        assert_eq!(fit_forest(&x, &y, &p, 3).unwrap(), fit_forest(&x, &y, &p, 3).unwrap());
        let g = GbmParams {
            n_rounds: 10,
            subsample: 0.7,
            ..GbmParams::default()
        };
        assert_eq!(fit_gbm(&x, &y, &g, 3).unwrap(), fit_gbm(&x, &y, &g, 3).unwrap());
    }

    #[test]
    fn forest_prediction_is_tree_mean() {
        let (x, y) = noisy(200, 3);
        let f = fit_forest(&x, &y, &ForestParams { n_trees: 7, ..ForestParams::default() }, 1).unwrap();
        for i in 0..20 {
            let direct = f.trees.iter().map(|t| t.predict_row(x.row(i))).sum::<f64>() / 7.0;
            assert!((f.predict_row(x.row(i)) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn forest_beats_tree_on_noisy_data() {
        let (x, y) = noisy(3000, 4);
        let (xt, yt) = noisy(1000, 5);
        let tree = fit_tree(&x, &y, &TreeParams::default(), 0).unwrap();
        let forest = fit_forest(&x, &y, &ForestParams::default(), 0).unwrap();
        assert!(rmse(&forest.predict(&xt).unwrap(), &yt) <= rmse(&tree.predict(&xt).unwrap(), &yt));
    }

    #[test]
    fn gbm_reductions() {
        let (x, y) = noisy(200, 6);
        let zero = fit_gbm(&x, &y, &GbmParams { n_rounds: 0, ..GbmParams::default() }, 0).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!(zero.predict(&x).unwrap().iter().all(|&p| p == mean));

        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let yy: Vec<f64> = (0..50).map(|i| ((i * 31) % 17) as f64).collect();
        let xx = Matrix::from_rows(&rows).unwrap();
        let full = GbmParams {
            n_rounds: 1,
            learning_rate: 1.0,
            subsample: 1.0,
            tree: TreeParams {
                max_depth: None,
                min_samples_leaf: 1,
                max_features: FeatureSubset::All,
            },
        };
        let m = fit_gbm(&xx, &yy, &full, 0).unwrap();
        for (p, t) in m.predict(&xx).unwrap().iter().zip(&yy) {
            assert!((p - t).abs() < 1e-9);
        }
    }

    #[test]
    fn gbm_loss_nonincreasing() {
        let (x, y) = noisy(1000, 7);
        let m = fit_gbm(&x, &y, &GbmParams::default(), 0).unwrap();
        assert_eq!(m.loss_log.len(), 101);
        for w in m.loss_log.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn importance_examples() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 3) as f64, 0.0, (i % 5) as f64, i as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 5.0 }).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let stump = fit_tree(&x, &y, &TreeParams { max_depth: Some(1), ..TreeParams::default() }, 0).unwrap();
        assert_eq!(stump.feature_importances().weights, vec![0.0, 0.0, 0.0, 1.0]);

        let leaf = fit_tree(&x, &[1.0; 40], &TreeParams::default(), 0).unwrap();
        assert!(!leaf.feature_importances().has_splits());

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..2000).map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        for spec in ModelSpec::default_roster() {
            let imp = spec.fit(&x, &y, 1).unwrap().feature_importances();
            assert!(imp.weights[0] > 0.9, "{} {:?}", spec.name(), imp.weights);
            assert!((imp.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn permuting_features_permutes_importances() {
        let (x, y) = noisy(800, 9);
        let order = [2, 0, 3, 1];
        let a = fit_tree(&x, &y, &TreeParams::default(), 0).unwrap().feature_importances().weights;
        let b = fit_tree(&x.permute_columns(&order), &y, &TreeParams::default(), 0)
            .unwrap()
            .feature_importances()
            .weights;
        for (k, &j) in order.iter().enumerate() {
            assert!((b[k] - a[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn persistence_round_trip_and_version_check() {
        let (x, y) = noisy(200, 10);
        let m = ModelSpec::Gbm(GbmParams { n_rounds: 5, ..GbmParams::default() }).fit(&x, &y, 0).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back: FittedModel<f64> = FittedModel::load(buf.as_slice()).unwrap();
        assert_eq!(back.predict(&x).unwrap(), m.predict(&x).unwrap());
        let text = String::from_utf8(buf).unwrap().replace("\"format_version\":1", "\"format_version\":7");
        assert!(matches!(
            FittedModel::<f64>::load(text.as_bytes()),
            Err(Error::UnsupportedVersion { found: 7, .. })
        ));
        let bad = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(m.predict(&bad).is_err());
    }

    #[test]
    fn importances_csv() {
        let imp = Importances::from_raw(vec![3.0, 1.0]);
        let mut out = Vec::new();
        imp.write_csv(&["a", "b"], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "feature,importance\na,0.75\nb,0.25\n");
    }

    #[test]
    fn f32_ensembles() {
        let rows: Vec<Vec<f32>> = (0..400).map(|i| vec![(i % 40) as f32, (i % 7) as f32]).collect();
        let y: Vec<f32> = rows.iter().map(|r| r[0] * 2.0).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = fit_gbm(&x, &y, &GbmParams::default(), 0).unwrap();
        let loss = *m.loss_log.last().unwrap();
        assert!(loss < 0.01 * m.loss_log[0]);
    }
}
