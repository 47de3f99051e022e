//! Real-versus-synthetic discrimination with L2 logistic regression.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::align_categorical;
use crate::error::{Error, Result};
use crate::stats::average_ranks;
use crate::table::{ColumnData, Table};

pub const MIN_DETECTION_ROWS: usize = 100;
pub const MAX_IMBALANCE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionSettings {
    pub lambda: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        DetectionSettings {
            lambda: 1.0,
            learning_rate: 0.1,
            iterations: 500,
            grad_tol: 1e-6,
            folds: 3,
            seed: 0,
        }
    }
}

/// Area under the ROC curve from the rank-sum statistic with midranks for
/// ties. `labels[i]` is true for the positive class.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 || scores.len() != labels.len() {
        return Err(Error::InvalidInput("AUC needs both classes and matching lengths".into()));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// `1 - 2 (AUC - 1/2)` clamped to `[0, 1]`.
pub fn detection_from_auc(auc: f64) -> f64 {
    (1.0 - 2.0 * (auc - 0.5)).clamp(0.0, 1.0)
}

/// One-hot categoricals stored as active indices plus dense continuous
/// features.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    n: usize,
    n_cat: usize,
    n_num: usize,
    n_features: usize,
    cat: Vec<u32>,
    num: Vec<f64>,
}

impl DesignMatrix {
    /// Stacks real rows above synthetic rows. Continuous columns are
    /// standardized with the pooled moments.
    pub fn stack(real: &Table, syn: &Table) -> Self {
        let (nr, ns) = (real.n_rows(), syn.n_rows());
        let n = nr + ns;
        let mut cat_cols = Vec::new();
        let mut num_cols = Vec::new();
        let mut offset = 0usize;
        for (rc, sc) in real.columns.iter().zip(&syn.columns) {
            match (&rc.data, &sc.data) {
                (ColumnData::Continuous(r), ColumnData::Continuous(s)) => {
                    let pooled: Vec<f64> = r.iter().chain(s).copied().collect();
                    let mean = crate::stats::mean(&pooled);
                    let sd = crate::stats::std_dev(&pooled);
                    num_cols.push(pooled.iter().map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 }).collect::<Vec<_>>());
                }
                _ => {
                    let (r, s, k) = align_categorical(rc, sc);
                    let at = offset as u32;
                    cat_cols.push(r.iter().chain(&s).map(|&c| at + c).collect::<Vec<u32>>());
                    offset += k;
                }
            }
        }
        let (n_cat, n_num) = (cat_cols.len(), num_cols.len());
        let mut cat = vec![0u32; n * n_cat];
        let mut num = vec![0.0; n * n_num];
        for i in 0..n {
            for (j, c) in cat_cols.iter().enumerate() {
                cat[i * n_cat + j] = c[i];
            }
            for (j, c) in num_cols.iter().enumerate() {
                num[i * n_num + j] = c[i];
            }
        }
        DesignMatrix {
            n,
            n_cat,
            n_num,
            n_features: offset + n_num,
            cat,
            num,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn dot(&self, w: &[f64], bias: f64, i: usize) -> f64 {
        let num_base = self.n_features - self.n_num;
        let mut z = bias;
        for &c in &self.cat[i * self.n_cat..(i + 1) * self.n_cat] {
            z += w[c as usize];
        }
        for (j, &x) in self.num[i * self.n_num..(i + 1) * self.n_num].iter().enumerate() {
            z += w[num_base + j] * x;
        }
        z
    }
}

/// L2-penalized logistic regression fitted by full-batch gradient ascent on
/// `mean log-likelihood - lambda / (2 n) ||w||^2`; the bias is unpenalized.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticModel {
    pub fn fit(x: &DesignMatrix, rows: &[usize], labels: &[bool], settings: &DetectionSettings) -> Self {
        let p = x.n_features;
        let num_base = p - x.n_num;
        let n = rows.len() as f64;
        let mut w = vec![0.0; p];
        let mut b = 0.0;
        let mut grad = vec![0.0; p];
        for _ in 0..settings.iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for &i in rows {
                let y = if labels[i] { 1.0 } else { 0.0 };
                let r = y - sigmoid(x.dot(&w, b, i));
                gb += r;
                for &c in &x.cat[i * x.n_cat..(i + 1) * x.n_cat] {
                    grad[c as usize] += r;
                }
                for (j, &v) in x.num[i * x.n_num..(i + 1) * x.n_num].iter().enumerate() {
                    grad[num_base + j] += r * v;
                }
            }
            let mut norm = (gb / n) * (gb / n);
            for (g, &wj) in grad.iter_mut().zip(&w) {
                *g = *g / n - settings.lambda / n * wj;
                norm += *g * *g;
            }
            if norm.sqrt() < settings.grad_tol {
                break;
            }
            b += settings.learning_rate * gb / n;
            for (wj, g) in w.iter_mut().zip(&grad) {
                *wj += settings.learning_rate * g;
            }
        }
        LogisticModel { weights: w, bias: b }
    }

    pub fn predict(&self, x: &DesignMatrix, i: usize) -> f64 {
        sigmoid(x.dot(&self.weights, self.bias, i))
    }
}

/// Cross-validated detection score: 1 for indistinguishable tables, 0 when a
/// classifier separates them perfectly.
pub fn detection_score(real: &Table, syn: &Table, settings: &DetectionSettings) -> Result<f64> {
    let (nr, ns) = (real.n_rows(), syn.n_rows());
    if nr < MIN_DETECTION_ROWS || ns < MIN_DETECTION_ROWS {
        return Err(Error::InvalidInput(format!(
            "detection needs at least {MIN_DETECTION_ROWS} rows per side, got {nr} real and {ns} synthetic"
        )));
    }
    let ratio = nr.max(ns) as f64 / nr.min(ns) as f64;
    if ratio > MAX_IMBALANCE {
        return Err(Error::InvalidInput(format!(
            "class imbalance {ratio:.1}:1 exceeds {MAX_IMBALANCE}:1; subsample first"
        )));
    }
    if settings.folds < 2 {
        return Err(Error::InvalidInput("detection needs at least 2 folds".into()));
    }
    let x = DesignMatrix::stack(real, syn);
    let labels: Vec<bool> = (0..x.n).map(|i| i >= nr).collect();
    let mut order: Vec<usize> = (0..x.n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(settings.seed));
    let mut total = 0.0;
    for f in 0..settings.folds {
        let (test, train): (Vec<usize>, Vec<usize>) =
            order.iter().enumerate().fold((Vec::new(), Vec::new()), |(mut te, mut tr), (pos, &i)| {
                if pos % settings.folds == f {
                    te.push(i);
                } else {
                    tr.push(i);
                }
                (te, tr)
            });
        let model = LogisticModel::fit(&x, &train, &labels, settings);
        let scores: Vec<f64> = test.iter().map(|&i| model.predict(&x, i)).collect();
        let y: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
        total += auc(&scores, &y)?;
    }
    Ok(detection_from_auc(total / settings.folds as f64))
}
