use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{is_constant, kendall_tau_b, pearson, spearman};
use crate::table::{Column, ColumnData, ColumnKind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
    Kendall,
}

impl CorrelationMethod {
    pub fn compute(self, x: &[f64], y: &[f64]) -> Option<f64> {
        match self {
            CorrelationMethod::Pearson => pearson(x, y),
            CorrelationMethod::Spearman => spearman(x, y),
            CorrelationMethod::Kendall => kendall_tau_b(x, y),
        }
    }
}

/// Tau-b rank correlation.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    kendall_tau_b(x, y)
}

fn continuous_columns<'a>(real: &'a Table, syn: &'a Table) -> Result<Vec<(&'a Column, &'a [f64], &'a [f64])>> {
    let cols: Vec<_> = real
        .indices_of(ColumnKind::Continuous)
        .into_iter()
        .map(|i| {
            let r = real.columns[i].as_continuous().expect("continuous");
            let s = syn.columns[i].as_continuous().expect("continuous");
            (&real.columns[i], r, s)
        })
        .collect();
    if cols.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 continuous columns, got {}",
            cols.len()
        )));
    }
    Ok(cols)
}

/// `1 - mean |a - b| / 2` over `(real, synthetic)` correlation pairs.
pub fn preservation_from_pairs(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no defined correlation pairs".into()));
    }
    let mean = pairs.iter().map(|(r, s)| (r - s).abs()).sum::<f64>() / pairs.len() as f64;
    Ok(1.0 - mean / 2.0)
}

/// Correlation preservation over every unordered pair of continuous columns.
/// Pairs involving a constant column are skipped.
pub fn correlation_preservation(real: &Table, syn: &Table, method: CorrelationMethod) -> Result<f64> {
    let cols = continuous_columns(real, syn)?;
    let mut pairs = Vec::new();
    for i in 0..cols.len() {
        for j in (i + 1)..cols.len() {
            match (method.compute(cols[i].1, cols[j].1), method.compute(cols[i].2, cols[j].2)) {
                (Some(r), Some(s)) => pairs.push((r, s)),
                _ => log::warn!(
                    "{method:?} correlation undefined for {} / {}; pair skipped",
                    cols[i].0.name,
                    cols[j].0.name
                ),
            }
        }
    }
    preservation_from_pairs(&pairs)
}

/// `1 - ||Rr - Rs||_F / ||Rr||_F`, floored at 0.
pub fn matrix_score(rr: &[f64], rs: &[f64]) -> f64 {
    let diff: f64 = rr.iter().zip(rs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = rr.iter().map(|a| a * a).sum::<f64>().sqrt();
    (1.0 - diff / norm).max(0.0)
}

/// Frobenius comparison of the Pearson matrices of the continuous columns.
/// Columns constant on either side are left out.
pub fn correlation_matrix_score(real: &Table, syn: &Table) -> Result<f64> {
    let cols: Vec<_> = continuous_columns(real, syn)?
        .into_iter()
        .filter(|(c, r, s)| {
            let keep = !is_constant(r) && !is_constant(s);
            if !keep {
                log::warn!("constant column {} left out of the correlation matrix", c.name);
            }
            keep
        })
        .collect();
    if cols.len() < 2 {
        return Err(Error::InvalidInput("fewer than 2 non-constant continuous columns".into()));
    }
    let d = cols.len();
    let mut rr = vec![1.0; d * d];
    let mut rs = vec![1.0; d * d];
    for i in 0..d {
        for j in (i + 1)..d {
            let a = pearson(cols[i].1, cols[j].1).unwrap_or(0.0);
            let b = pearson(cols[i].2, cols[j].2).unwrap_or(0.0);
            rr[i * d + j] = a;
            rr[j * d + i] = a;
            rs[i * d + j] = b;
            rs[j * d + i] = b;
        }
    }
    Ok(matrix_score(&rr, &rs))
}

/// Bias-uncorrected Cramér's V. `None` when either side has a single level.
pub fn cramers_v(a: &[u32], b: &[u32]) -> Option<f64> {
    let n = a.len();
    if n == 0 || n != b.len() {
        return None;
    }
    let compress = |xs: &[u32]| -> (Vec<usize>, usize) {
        let max = xs.iter().copied().max().unwrap_or(0) as usize;
        let mut map = vec![usize::MAX; max + 1];
        let mut k = 0;
        let codes = xs
            .iter()
            .map(|&x| {
                if map[x as usize] == usize::MAX {
                    map[x as usize] = k;
                    k += 1;
                }
                map[x as usize]
            })
            .collect();
        (codes, k)
    };
    let (ca, ka) = compress(a);
    let (cb, kb) = compress(b);
    if ka < 2 || kb < 2 {
        return None;
    }
    let mut table = vec![0.0f64; ka * kb];
    let mut ra = vec![0.0f64; ka];
    let mut rb = vec![0.0f64; kb];
    for (&x, &y) in ca.iter().zip(&cb) {
        table[x * kb + y] += 1.0;
        ra[x] += 1.0;
        rb[y] += 1.0;
    }
    let nf = n as f64;
    let mut chi2 = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let e = ra[x] * rb[y] / nf;
            let o = table[x * kb + y];
            chi2 += (o - e) * (o - e) / e;
        }
    }
    Some((chi2 / (nf * (ka.min(kb) - 1) as f64)).sqrt().min(1.0))
}

/// Correlation ratio: square root of the between-group share of variance.
pub fn correlation_ratio(codes: &[u32], values: &[f64]) -> Option<f64> {
    if codes.is_empty() || codes.len() != values.len() {
        return None;
    }
    let k = codes.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut sums = vec![0.0f64; k];
    let mut counts = vec![0.0f64; k];
    for (&c, &v) in codes.iter().zip(values) {
        sums[c as usize] += v;
        counts[c as usize] += 1.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let total: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    if total <= 0.0 {
        return None;
    }
    let between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0.0)
        .map(|(&s, &c)| c * (s / c - mean).powi(2))
        .sum();
    Some((between / total).clamp(0.0, 1.0).sqrt())
}

/// Association of a column pair with the width of its range: Pearson r on
/// [-1, 1], Cramér's V and the correlation ratio on [0, 1].
pub fn association(a: &Column, b: &Column) -> Option<(f64, f64)> {
    match (&a.data, &b.data) {
        (ColumnData::Continuous(x), ColumnData::Continuous(y)) => pearson(x, y).map(|r| (r, 2.0)),
        (ColumnData::Categorical { codes: x, .. }, ColumnData::Categorical { codes: y, .. }) => {
            cramers_v(x, y).map(|v| (v, 1.0))
        }
        (ColumnData::Categorical { codes, .. }, ColumnData::Continuous(v))
        | (ColumnData::Continuous(v), ColumnData::Categorical { codes, .. }) => {
            correlation_ratio(codes, v).map(|e| (e, 1.0))
        }
    }
}

/// Mean pair score `1 - |a_real - a_syn| / range` over all column pairs.
pub fn mixed_type_score(real: &Table, syn: &Table) -> Result<f64> {
    let d = real.n_cols();
    if d < 2 {
        return Err(Error::InvalidInput("mixed-type score needs at least 2 columns".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..d {
        for j in (i + 1)..d {
            let r = association(&real.columns[i], &real.columns[j]);
            let s = association(&syn.columns[i], &syn.columns[j]);
            match (r, s) {
                (Some((r, range)), Some((s, _))) => {
                    total += 1.0 - (r - s).abs() / range;
                    count += 1;
                }
                _ => log::warn!(
                    "association undefined for {} / {}; pair skipped",
                    real.columns[i].name,
                    real.columns[j].name
                ),
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidInput("no defined column associations".into()));
    }
    Ok(total / count as f64)
}
