//! CART regression trees with exact variance-reduction split search.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    All,
    /// `ceil(d / 3)` features drawn per split.
    OneThird,
    Exactly(usize),
}

impl FeatureSubset {
    pub fn count(self, d: usize) -> usize {
        match self {
            FeatureSubset::All => d,
            FeatureSubset::OneThird => d.div_ceil(3),
            FeatureSubset::Exactly(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules apply. Serialized as the
    /// string `"unlimited"` since TOML has no null.
    #[serde(with = "depth_serde")]
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: FeatureSubset,
}

mod depth_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Depth {
        Limited(usize),
        Named(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => Depth::Limited(*d),
            None => Depth::Named("unlimited".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Depth::deserialize(d)? {
            Depth::Limited(v) => Ok(Some(v)),
            Depth::Named(s) if s == "unlimited" => Ok(None),
            Depth::Named(s) => Err(serde::de::Error::custom(format!("invalid max_depth {s:?}"))),
        }
    }
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(12),
            min_samples_leaf: 20,
            max_features: FeatureSubset::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node<T> {
    Leaf {
        value: T,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel<T> {
    pub n_features: usize,
    pub nodes: Vec<Node<T>>,
    /// Unnormalized per-feature SSE reduction divided by the training size.
    pub raw_importances: Vec<T>,
}

impl<T: Scalar> TreeModel<T> {
    pub fn predict_row(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Features replaced by their rank among the training values, so split
/// search can histogram by rank.
#[derive(Debug, Clone)]
pub struct Binned<T> {
    n_rows: usize,
    /// Column-major ranks.
    bins: Vec<Vec<u32>>,
    /// Sorted unique values per feature.
    values: Vec<Vec<T>>,
}

impl<T: Scalar> Binned<T> {
    pub fn new(x: &Matrix<T>) -> Result<Self> {
        let mut bins = Vec::with_capacity(x.n_cols());
        let mut values = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let col = x.column(j);
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("feature {j} has non-finite values")));
            }
            let mut uniq = col.clone();
            uniq.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            uniq.dedup();
            bins.push(
                col.iter()
                    .map(|v| uniq.partition_point(|u| u < v) as u32)
                    .collect(),
            );
            values.push(uniq);
        }
        Ok(Binned {
            n_rows: x.n_rows(),
            bins,
            values,
        })
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
}

struct SplitChoice<T> {
    feature: usize,
    threshold: T,
    gain: T,
    /// Largest rank sent left.
    cut: u32,
}

struct Builder<'a, T> {
    data: &'a Binned<T>,
    y: &'a [T],
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node<T>>,
    importances: Vec<T>,
    n_total: T,
    count: Vec<usize>,
    sum: Vec<T>,
}

impl<T: Scalar> Builder<'_, T> {
    fn best_split(&mut self, rows: &[u32], total: T, total_sq: T) -> Option<SplitChoice<T>> {
        let d = self.data.n_features();
        let mut features: Vec<usize> = match self.params.max_features {
            FeatureSubset::All => (0..d).collect(),
            subset => sample(&mut self.rng, d, subset.count(d)).into_vec(),
        };
        features.sort_unstable();
        let n = rows.len();
        let nf = T::of_usize(n);
        let parent = total * total / nf;
        // Every term of a gain is bounded by the node's sum of squares; gains
        // closer than this are ties.
        let tol = T::epsilon() * T::of(64.0) * (total_sq + T::one());
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<SplitChoice<T>> = None;
        for f in features {
            let ranks = &self.data.bins[f];
            let k = self.data.values[f].len();
            if k < 2 {
                continue;
            }
            let (count, sum) = (&mut self.count[..k], &mut self.sum[..k]);
            count.iter_mut().for_each(|c| *c = 0);
            sum.iter_mut().for_each(|s| *s = T::zero());
            for &r in rows {
                let b = ranks[r as usize] as usize;
                count[b] += 1;
                sum[b] = sum[b] + self.y[r as usize];
            }
            let mut left_n = 0usize;
            let mut left_sum = T::zero();
            let mut prev: Option<usize> = None;
            for b in 0..k {
                if count[b] == 0 {
                    continue;
                }
                if let Some(p) = prev {
                    if left_n >= min_leaf && n - left_n >= min_leaf {
                        let (ln, rn) = (T::of_usize(left_n), T::of_usize(n - left_n));
                        let right_sum = total - left_sum;
                        let gain = left_sum * left_sum / ln + right_sum * right_sum / rn - parent;
                        if gain > tol && best.as_ref().is_none_or(|s| gain > s.gain + tol) {
                            let v = &self.data.values[f];
                            best = Some(SplitChoice {
                                feature: f,
                                threshold: (v[p] + v[b]) / T::two(),
                                gain,
                                cut: p as u32,
                            });
                        }
                    }
                }
                left_n += count[b];
                left_sum = left_sum + sum[b];
                prev = Some(b);
            }
        }
        best
    }

    fn grow(&mut self, rows: &mut [u32], depth: usize) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let total: T = rows.iter().map(|&r| self.y[r as usize]).sum();
        let total_sq: T = rows.iter().map(|&r| self.y[r as usize] * self.y[r as usize]).sum();
        let mean = total / T::of_usize(n);
        self.nodes.push(Node::Leaf { value: mean, n });
        let first = self.y[rows[0] as usize];
        let constant = rows.iter().all(|&r| self.y[r as usize] == first);
        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        if constant || !depth_ok || n < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some(split) = self.best_split(rows, total, total_sq) else {
            return id;
        };
        self.importances[split.feature] = self.importances[split.feature] + split.gain / self.n_total;
        let ranks = &self.data.bins[split.feature];
        let mut lo = 0;
        for i in 0..n {
            if ranks[rows[i] as usize] <= split.cut {
                rows.swap(lo, i);
                lo += 1;
            }
        }
        let (l, r) = rows.split_at_mut(lo);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Fits a tree on the given training rows (repeats allowed, as in a
/// bootstrap sample).
pub fn fit_tree_on<T: Scalar>(
    data: &Binned<T>,
    y: &[T],
    rows: &[u32],
    params: &TreeParams,
    seed: u64,
) -> Result<TreeModel<T>> {
    if rows.len() < 2 {
        return Err(Error::InvalidInput(format!("tree needs at least 2 rows, got {}", rows.len())));
    }
    if y.len() != data.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: data.n_rows(),
            actual: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("targets must be finite".into()));
    }
    let width = data.values.iter().map(Vec::len).max().unwrap_or(0);
    let mut b = Builder {
        data,
        y,
        params,
        rng: ChaCha8Rng::seed_from_u64(seed),
        nodes: Vec::new(),
        importances: vec![T::zero(); data.n_features()],
        n_total: T::of_usize(rows.len()),
        count: vec![0; width],
        sum: vec![T::zero(); width],
    };
    let mut rows = rows.to_vec();
    b.grow(&mut rows, 0);
    Ok(TreeModel {
        n_features: data.n_features(),
        nodes: b.nodes,
        raw_importances: b.importances,
    })
}

pub fn fit_tree<T: Scalar>(x: &Matrix<T>, y: &[T], params: &TreeParams, seed: u64) -> Result<TreeModel<T>> {
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    let data = Binned::new(x)?;
    let rows: Vec<u32> = (0..x.n_rows() as u32).collect();
    fit_tree_on(&data, y, &rows, params, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_best(x: &[Vec<f64>], y: &[f64], min_leaf: usize) -> Option<(usize, f64, f64)> {
        // Exhaustive: every feature, every midpoint, SSE computed directly.
        let sse = |ys: &[f64]| {
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            ys.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        };
        let parent = sse(y);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..x[0].len() {
            let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let l: Vec<f64> = x.iter().zip(y).filter(|(r, _)| r[f] <= t).map(|(_, v)| *v).collect();
                let r: Vec<f64> = x.iter().zip(y).filter(|(r, _)| r[f] > t).map(|(_, v)| *v).collect();
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let gain = parent - sse(&l) - sse(&r);
                if gain > 1e-12 && best.is_none_or(|b| gain > b.2 + 1e-9) {
                    best = Some((f, t, gain));
                }
            }
        }
        best
    }

    #[test]
    fn root_split_matches_exhaustive_search() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n = rng.random_range(6..40);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.random_range(0..6) as f64).collect())
                .collect();
            let y: Vec<f64> = rows.iter().map(|r| r[1] * 2.0 + rng.random_range(0..3) as f64).collect();
            let params = TreeParams {
                max_depth: Some(1),
                min_samples_leaf: 2,
                max_features: FeatureSubset::All,
            };
            let tree = fit_tree(&Matrix::from_rows(&rows).unwrap(), &y, &params, 0).unwrap();
            match (brute_best(&rows, &y, 2), &tree.nodes[0]) {
                (Some((f, t, _)), Node::Split { feature, threshold, .. }) => {
                    assert_eq!((*feature, *threshold), (f, t));
                }
                (None, Node::Leaf { .. }) => {}
                (b, n) => panic!("{b:?} vs {n:?}"),
            }
        }
    }

    #[test]
    fn separable_step() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i > 5 { 1.0 } else { 0.0 }).collect();
        let params = TreeParams {
            min_samples_leaf: 1,
            ..TreeParams::default()
        };
        let tree = fit_tree(&Matrix::from_rows(&rows).unwrap(), &y, &params, 0).unwrap();
        assert_eq!(tree.depth(), 1);
        match tree.nodes[0] {
            Node::Split { threshold, .. } => assert!(threshold > 5.0 && threshold < 6.0),
            _ => panic!(),
        }
        for (r, v) in rows.iter().zip(&y) {
            assert_eq!(tree.predict_row(r), *v);
        }
    }

    #[test]
    fn degenerate_cases() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 4) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let tree = fit_tree(&x, &[7.0; 30], &TreeParams::default(), 0).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { value: 7.0, n: 30 }]);
        let y: Vec<f64> = (0..30).map(f64::from).collect();
        let params = TreeParams {
            min_samples_leaf: 30,
            ..TreeParams::default()
        };
        let tree = fit_tree(&x, &y, &params, 0).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { value: 14.5, n: 30 }]);
        assert!(fit_tree(&Matrix::from_rows(&[vec![1.0]]).unwrap(), &[1.0], &params, 0).is_err());
    }

    #[test]
    fn ties_go_to_lower_feature() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| if i < 4 { 0.0 } else { 1.0 }).collect();
        let params = TreeParams {
            min_samples_leaf: 1,
            ..TreeParams::default()
        };
        let tree = fit_tree(&Matrix::from_rows(&rows).unwrap(), &y, &params, 0).unwrap();
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn training_row_in_own_leaf_gets_leaf_mean() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i / 4) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| (i % 4) as f64 + (i / 4) as f64 * 10.0).collect();
        let params = TreeParams {
            min_samples_leaf: 1,
            max_depth: None,
            ..TreeParams::default()
        };
        let tree = fit_tree(&Matrix::from_rows(&rows).unwrap(), &y, &params, 0).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let group = i / 4;
            let mean = (0..4).map(|k| k as f64 + group as f64 * 10.0).sum::<f64>() / 4.0;
            assert_eq!(tree.predict_row(r), mean);
        }
    }

    #[test]
    fn works_in_f32() {
        let rows: Vec<Vec<f32>> = (0..50).map(|i| vec![i as f32]).collect();
        let y: Vec<f32> = (0..50).map(|i| if i >= 25 { 3.0 } else { -1.0 }).collect();
        let tree = fit_tree(&Matrix::from_rows(&rows).unwrap(), &y, &TreeParams::default(), 0).unwrap();
        assert_eq!(tree.predict_row(&[40.0]), 3.0);
        assert_eq!(tree.predict_row(&[2.0]), -1.0);
    }
}
