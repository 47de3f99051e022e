use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::align_categorical;
use crate::error::{Error, Result};
use crate::stats::ks_two_sample;
use crate::table::{Column, ColumnKind, LevelOrder, Table};

/// `1 - D_KS` between two samples.
pub fn ks_complement(real: &[f64], syn: &[f64]) -> Result<f64> {
    ks_two_sample(real, syn)
        .map(|d| 1.0 - d)
        .ok_or_else(|| Error::Empty("KS complement needs nonempty columns".into()))
}

/// Mean KS complement over continuous columns.
pub fn ks_complement_table(real: &Table, syn: &Table) -> Result<f64> {
    let cols = real.indices_of(ColumnKind::Continuous);
    if cols.is_empty() {
        return Err(Error::InvalidInput("no continuous columns".into()));
    }
    let mut total = 0.0;
    for &c in &cols {
        let (r, s) = (real.columns[c].as_continuous(), syn.columns[c].as_continuous());
        total += ks_complement(r.expect("continuous"), s.expect("continuous"))?;
    }
    Ok(total / cols.len() as f64)
}

/// What the chi-squared statistic is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiSquaredMode {
    /// Synthetic counts against real frequencies scaled to the synthetic size.
    Counts,
    /// Synthetic proportions against real proportions; insensitive to sample
    /// size, so identical distributions saturate at 1.
    #[default]
    Proportions,
}

/// p-value of Pearson's chi-squared test of synthetic category frequencies
/// against real ones. Codes index a shared level set of size `k`; real cells
/// with zero count get one pseudo-count.
pub fn chi_squared_codes(real: &[u32], syn: &[u32], k: usize, mode: ChiSquaredMode) -> Result<f64> {
    if real.is_empty() || syn.is_empty() {
        return Err(Error::Empty("chi-squared needs nonempty columns".into()));
    }
    let mut rc = vec![0.0f64; k];
    let mut sc = vec![0.0f64; k];
    for &c in real {
        rc[c as usize] += 1.0;
    }
    for &c in syn {
        sc[c as usize] += 1.0;
    }
    let support: Vec<usize> = (0..k).filter(|&i| rc[i] > 0.0 || sc[i] > 0.0).collect();
    if support.len() < 2 {
        return Ok(1.0);
    }
    let floored: Vec<f64> = support.iter().map(|&i| rc[i].max(1.0)).collect();
    let real_total: f64 = floored.iter().sum();
    let n_syn = syn.len() as f64;
    let scale = match mode {
        ChiSquaredMode::Counts => n_syn,
        ChiSquaredMode::Proportions => 1.0,
    };
    let stat: f64 = support
        .iter()
        .zip(&floored)
        .map(|(&i, &r)| {
            let expected = scale * r / real_total;
            let observed = scale * sc[i] / n_syn;
            (observed - expected).powi(2) / expected
        })
        .sum();
    let dist = ChiSquared::new((support.len() - 1) as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(dist.sf(stat))
}

/// Chi-squared score on two label columns.
pub fn chi_squared_score<S: AsRef<str>>(real: &[S], syn: &[S], mode: ChiSquaredMode) -> Result<f64> {
    let (r, s, k) = align_categorical(
        &Column::categorical("real", real, LevelOrder::FirstAppearance),
        &Column::categorical("syn", syn, LevelOrder::FirstAppearance),
    );
    chi_squared_codes(&r, &s, k, mode)
}

/// Mean chi-squared score over categorical columns.
pub fn chi_squared_table(real: &Table, syn: &Table, mode: ChiSquaredMode) -> Result<f64> {
    let cols = real.indices_of(ColumnKind::Categorical);
    if cols.is_empty() {
        return Err(Error::InvalidInput("no categorical columns".into()));
    }
    let mut total = 0.0;
    for &c in &cols {
        let (r, s, k) = align_categorical(&real.columns[c], &syn.columns[c]);
        total += chi_squared_codes(&r, &s, k, mode)?;
    }
    Ok(total / cols.len() as f64)
}
