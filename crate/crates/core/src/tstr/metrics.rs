use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics<T> {
    pub rmse: T,
    pub mae: T,
    /// `None` when the truth is constant.
    pub r2: Option<T>,
}

pub fn regression_metrics<T: Scalar>(y: &[T], yhat: &[T]) -> Result<RegressionMetrics<T>> {
    if y.is_empty() || y.len() != yhat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: yhat.len(),
        });
    }
    let n = T::of_usize(y.len());
    let mean = y.iter().copied().sum::<T>() / n;
    let (mut ss_res, mut abs, mut ss_tot) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in y.iter().zip(yhat) {
        let e = a - b;
        ss_res = ss_res + e * e;
        abs = abs + e.abs();
        ss_tot = ss_tot + (a - mean) * (a - mean);
    }
    Ok(RegressionMetrics {
        rmse: (ss_res / n).sqrt(),
        mae: abs / n,
        r2: (ss_tot > T::zero()).then(|| T::one() - ss_res / ss_tot),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utility<T> {
    pub u_rmse: T,
    /// `None` when the real-data R² is not positive.
    pub u_r2: Option<T>,
    /// Mean of the two ratios, or `u_rmse` alone when `u_r2` is undefined.
    pub u_model: T,
}

/// Capped performance ratios of a synthetic-trained model against its
/// real-trained counterpart.
pub fn utility_scores<T: Scalar>(real: &RegressionMetrics<T>, syn: &RegressionMetrics<T>) -> Result<Utility<T>> {
    if !(real.rmse > T::zero() && syn.rmse > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "utility needs positive RMSE, got {} and {}",
            real.rmse, syn.rmse
        )));
    }
    let u_rmse = (real.rmse / syn.rmse).min(T::one());
    let u_r2 = match (real.r2, syn.r2) {
        (Some(r), Some(s)) if r > T::zero() => Some((s / r).min(T::one()).max(T::zero())),
        _ => None,
    };
    let u_model = match u_r2 {
        Some(u) => (u_rmse + u) / T::two(),
        None => u_rmse,
    };
    Ok(Utility { u_rmse, u_r2, u_model })
}

pub fn generator_utility<T: Scalar>(per_model: &[T]) -> Result<T> {
    if per_model.is_empty() {
        return Err(Error::Empty("no model utilities to average".into()));
    }
    Ok(per_model.iter().copied().sum::<T>() / T::of_usize(per_model.len()))
}

/// Cosine similarity. `None` when either vector is all zero.
pub fn importance_alignment<T: Scalar>(a: &[T], b: &[T]) -> Result<Option<T>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        return Ok(None);
    }
    Ok(Some((dot / (na * nb)).min(T::one()).max(-T::one())))
}
