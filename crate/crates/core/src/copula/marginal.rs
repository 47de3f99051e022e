//! Univariate marginals: parametric families selected by Kolmogorov-Smirnov
//! distance for continuous columns, frequency intervals for categorical ones.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use super::normal::{phi, phi_inv};
use crate::error::{Error, Result};
use crate::stats::ks_one_sample;

pub const MIN_FIT_VALUES: usize = 30;

/// Candidate families, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Lognormal,
    Exponential,
    Beta,
    Gamma,
    Uniform,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Gaussian,
        Family::Lognormal,
        Family::Exponential,
        Family::Beta,
        Family::Gamma,
        Family::Uniform,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Gaussian { mean: f64, sd: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
    Beta { alpha: f64, beta: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { low: f64, high: f64 },
    PointMass { value: f64 },
}

impl Distribution {
    pub fn family(&self) -> Option<Family> {
        Some(match self {
            Distribution::Gaussian { .. } => Family::Gaussian,
            Distribution::Lognormal { .. } => Family::Lognormal,
            Distribution::Exponential { .. } => Family::Exponential,
            Distribution::Beta { .. } => Family::Beta,
            Distribution::Gamma { .. } => Family::Gamma,
            Distribution::Uniform { .. } => Family::Uniform,
            Distribution::PointMass { .. } => return None,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Gaussian { mean, sd } => phi((x - mean) / sd),
            Distribution::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    phi((x.ln() - mu) / sigma)
                }
            }
            Distribution::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Distribution::Beta { alpha, beta } => {
                if x <= 0.0 {
                    0.0
                } else if x >= 1.0 {
                    1.0
                } else {
                    beta_reg(alpha, beta, x)
                }
            }
            Distribution::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, x / scale)
                }
            }
            Distribution::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Distribution::PointMass { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Gamma { shape, scale } if x > 0.0 => {
                ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
            }
            Distribution::Beta { alpha, beta } if x > 0.0 && x < 1.0 => {
                ((alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - ln_beta(alpha, beta)).exp()
            }
            _ => 0.0,
        }
    }

    /// Quantile function.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Distribution::Gaussian { mean, sd } => mean + sd * phi_inv(u),
            Distribution::Lognormal { mu, sigma } => (mu + sigma * phi_inv(u)).exp(),
            Distribution::Exponential { rate } => -(-u).ln_1p() / rate,
            Distribution::Uniform { low, high } => low + u * (high - low),
            Distribution::PointMass { value } => value,
            Distribution::Beta { .. } => self.invert(u, 0.0, 1.0),
            Distribution::Gamma { shape, scale } => {
                let mut hi = (shape * scale).max(1e-12);
                while self.cdf(hi) < u && hi.is_finite() {
                    hi *= 2.0;
                }
                self.invert(u, 0.0, hi)
            }
        }
    }

    /// Safeguarded Newton iteration on a bracket `[lo, hi]` with
    /// `cdf(lo) <= u <= cdf(hi)`.
    fn invert(&self, u: f64, mut lo: f64, mut hi: f64) -> f64 {
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.cdf(x) - u;
            if f.abs() <= 1e-15 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = self.pdf(x);
            let newton = x - f / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        x
    }
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v)
}

/// Fits one family. `None` when the data fall outside the family's support or
/// the estimates are degenerate.
pub fn fit_family(family: Family, xs: &[f64]) -> Option<Distribution> {
    let (m, v) = moments(xs);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dist = match family {
        Family::Gaussian => Distribution::Gaussian { mean: m, sd: v.sqrt() },
        Family::Lognormal => {
            if min <= 0.0 {
                return None;
            }
            let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let (mu, lv) = moments(&logs);
            Distribution::Lognormal { mu, sigma: lv.sqrt() }
        }
        Family::Exponential => {
            if min < 0.0 || m <= 0.0 {
                return None;
            }
            Distribution::Exponential { rate: 1.0 / m }
        }
        Family::Beta => {
            if min < 0.0 || max > 1.0 {
                return None;
            }
            let common = m * (1.0 - m) / v - 1.0;
            if !(common > 0.0) {
                return None;
            }
            Distribution::Beta {
                alpha: m * common,
                beta: (1.0 - m) * common,
            }
        }
        Family::Gamma => {
            if min < 0.0 || m <= 0.0 {
                return None;
            }
            Distribution::Gamma {
                shape: m * m / v,
                scale: v / m,
            }
        }
        Family::Uniform => Distribution::Uniform { low: min, high: max },
    };
    let finite = match dist {
        Distribution::Gaussian { mean, sd } => mean.is_finite() && sd > 0.0,
        Distribution::Lognormal { mu, sigma } => mu.is_finite() && sigma > 0.0,
        Distribution::Exponential { rate } => rate.is_finite() && rate > 0.0,
        Distribution::Beta { alpha, beta } => alpha.is_finite() && beta.is_finite(),
        Distribution::Gamma { shape, scale } => shape.is_finite() && scale.is_finite() && scale > 0.0,
        Distribution::Uniform { low, high } => high > low,
        Distribution::PointMass { .. } => true,
    };
    finite.then_some(dist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousMarginal {
    pub distribution: Distribution,
    /// KS distance of the selected fit against the training values.
    pub ks_stat: f64,
    /// Observed range; samples are clipped to it.
    pub min: f64,
    pub max: f64,
    /// All training values were whole numbers; samples are rounded.
    pub integral: bool,
}

impl ContinuousMarginal {
    pub fn is_degenerate(&self) -> bool {
        matches!(self.distribution, Distribution::PointMass { .. })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.distribution.cdf(x)
    }

    /// Quantile followed by range clipping and, for integral columns, rounding.
    pub fn decode(&self, u: f64) -> f64 {
        let x = self.distribution.inverse_cdf(u).clamp(self.min, self.max);
        if self.integral {
            x.round()
        } else {
            x
        }
    }
}

/// Fits every candidate family and keeps the one with the smallest KS
/// distance. Differences under `0.5 / sqrt(n)` count as ties and go to the
/// earlier candidate, so a nested two-parameter family does not displace a
/// one-parameter one on noise. A constant column becomes a point mass.
pub fn fit_marginal(values: &[f64], candidates: &[Family]) -> Result<ContinuousMarginal> {
    if values.len() < MIN_FIT_VALUES {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_FIT_VALUES} values to fit a marginal, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("marginal fit requires finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let integral = sorted.iter().all(|v| v.fract() == 0.0);
    if min == max {
        log::warn!("constant column fitted as a point mass at {min}");
        return Ok(ContinuousMarginal {
            distribution: Distribution::PointMass { value: min },
            ks_stat: 0.0,
            min,
            max,
            integral,
        });
    }
    let tie = 0.5 / (sorted.len() as f64).sqrt();
    let mut best: Option<(Distribution, f64)> = None;
    for &family in candidates {
        if let Some(dist) = fit_family(family, &sorted) {
            let ks = ks_one_sample(&sorted, |x| dist.cdf(x));
            if best.as_ref().is_none_or(|(_, b)| ks < *b - tie) {
                best = Some((dist, ks));
            }
        }
    }
    let (distribution, ks_stat) =
        best.ok_or_else(|| Error::InvalidInput("no candidate family supports this column".into()))?;
    Ok(ContinuousMarginal {
        distribution,
        ks_stat,
        min,
        max,
        integral,
    })
}

/// Categories with cumulative-frequency boundaries on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalMarginal {
    pub levels: Vec<String>,
    /// `levels.len() + 1` ascending boundaries from 0 to 1; category `i` owns
    /// `[bounds[i], bounds[i + 1])`.
    pub bounds: Vec<f64>,
}

impl CategoricalMarginal {
    /// Intervals in level order, widths equal to relative frequencies. Levels
    /// that never occur are dropped.
    pub fn fit(levels: &[String], codes: &[u32]) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::Empty("categorical column has no rows".into()));
        }
        let mut counts = vec![0usize; levels.len()];
        for &c in codes {
            counts[c as usize] += 1;
        }
        let n = codes.len() as f64;
        let mut kept = Vec::new();
        let mut bounds = vec![0.0];
        let mut acc = 0usize;
        for (level, &count) in levels.iter().zip(&counts) {
            if count == 0 {
                continue;
            }
            acc += count;
            kept.push(level.clone());
            bounds.push(acc as f64 / n);
        }
        *bounds.last_mut().expect("nonempty") = 1.0;
        Ok(CategoricalMarginal { levels: kept, bounds })
    }

    pub fn interval(&self, code: usize) -> (f64, f64) {
        (self.bounds[code], self.bounds[code + 1])
    }

    pub fn code_of(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }

    /// Category whose interval contains `u`.
    pub fn lookup(&self, u: f64) -> usize {
        let k = self.levels.len();
        self.bounds[1..k].partition_point(|&b| b <= u).min(k - 1)
    }

    pub fn is_degenerate(&self) -> bool {
        self.levels.len() < 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MarginalModel {
    Continuous(ContinuousMarginal),
    Categorical(CategoricalMarginal),
}

impl MarginalModel {
    pub fn is_degenerate(&self) -> bool {
        match self {
            MarginalModel::Continuous(m) => m.is_degenerate(),
            MarginalModel::Categorical(m) => m.is_degenerate(),
        }
    }
}
