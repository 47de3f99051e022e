use std::collections::BTreeMap;

use super::align_categorical;
use crate::error::{Error, Result};
use crate::stats::{bin_of, quantile_cuts};
use crate::table::{ColumnKind, Table};

/// `KL(p || q)` in nats. Terms with `p = 0` contribute nothing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

/// Add-one smoothed probabilities.
pub fn smoothed(counts: &[usize]) -> Vec<f64> {
    let total = counts.iter().sum::<usize>() as f64 + counts.len() as f64;
    counts.iter().map(|&c| (c as f64 + 1.0) / total).collect()
}

fn fidelity(real_counts: &[usize], syn_counts: &[usize]) -> f64 {
    (-kl_divergence(&smoothed(real_counts), &smoothed(syn_counts))).exp()
}

/// Histogram KL fidelity for one column over real-quantile bins. `None` when
/// the real column has fewer than two distinct values.
pub fn continuous_kl_column(real: &[f64], syn: &[f64], bins: usize) -> Option<f64> {
    let first = real.first()?;
    if real.iter().all(|v| v == first) {
        return None;
    }
    let cuts = quantile_cuts(real, bins);
    let k = cuts.len() + 1;
    let hist = |xs: &[f64]| {
        let mut h = vec![0usize; k];
        for &x in xs {
            h[bin_of(&cuts, x)] += 1;
        }
        h
    };
    Some(fidelity(&hist(real), &hist(syn)))
}

/// Mean histogram KL fidelity over continuous columns.
pub fn continuous_kl_fidelity(real: &Table, syn: &Table, bins: usize) -> Result<f64> {
    let mut scores = Vec::new();
    for c in real.indices_of(ColumnKind::Continuous) {
        let (r, s) = (real.columns[c].as_continuous().expect("continuous"), syn.columns[c].as_continuous().expect("continuous"));
        match continuous_kl_column(r, s, bins) {
            Some(f) => scores.push(f),
            None => log::warn!("column {} has fewer than 2 distinct values; KL skipped", real.columns[c].name),
        }
    }
    if scores.is_empty() {
        return Err(Error::InvalidInput("no continuous column with 2+ distinct values".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Joint KL fidelity of keyed observations over the union of observed keys.
pub fn joint_kl_fidelity<K: Ord>(real: impl IntoIterator<Item = K>, syn: impl IntoIterator<Item = K>) -> f64 {
    let mut cells: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    for k in real {
        cells.entry(k).or_default().0 += 1;
    }
    for k in syn {
        cells.entry(k).or_default().1 += 1;
    }
    let (r, s): (Vec<usize>, Vec<usize>) = cells.values().copied().unzip();
    fidelity(&r, &s)
}

/// Mean joint KL fidelity over unordered pairs of categorical columns; a
/// single categorical column falls back to its univariate distribution.
pub fn discrete_kl_fidelity(real: &Table, syn: &Table) -> Result<f64> {
    let cols = real.indices_of(ColumnKind::Categorical);
    let aligned: Vec<(Vec<u32>, Vec<u32>)> = cols
        .iter()
        .map(|&c| {
            let (r, s, _) = align_categorical(&real.columns[c], &syn.columns[c]);
            (r, s)
        })
        .collect();
    match aligned.len() {
        0 => Err(Error::InvalidInput("no categorical columns".into())),
        1 => Ok(joint_kl_fidelity(aligned[0].0.iter().copied(), aligned[0].1.iter().copied())),
        n => {
            let mut total = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let (a, b) = (&aligned[i], &aligned[j]);
                    total += joint_kl_fidelity(
                        a.0.iter().copied().zip(b.0.iter().copied()),
                        a.1.iter().copied().zip(b.1.iter().copied()),
                    );
                }
            }
            Ok(total / (n * (n - 1) / 2) as f64)
        }
    }
}
