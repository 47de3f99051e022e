//! Diagonal-covariance Gaussian mixtures fitted by EM with BIC selection.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ColumnKind, Table};

const LN_2PI: f64 = 1.8378770664093453;
const MIN_WEIGHT: f64 = 1e-8;
pub const MIN_GMM_ROWS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmSettings {
    pub max_components: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub var_floor: f64,
    pub seed: u64,
}

impl Default for GmmSettings {
    fn default() -> Self {
        GmmSettings {
            max_components: 5,
            restarts: 3,
            max_iter: 200,
            tol: 1e-6,
            var_floor: 1e-6,
            seed: 0,
        }
    }
}

/// Row-major `n x d` data.
#[derive(Debug, Clone)]
pub struct Points {
    pub data: Vec<f64>,
    pub dim: usize,
}

impl Points {
    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    fn component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = self.weights[j].ln();
            for ((&xi, &m), &v) in x.iter().zip(&self.means[j]).zip(&self.vars[j]) {
                s -= 0.5 * (LN_2PI + v.ln() + (xi - m) * (xi - m) / v);
            }
            *o = s;
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.k()];
        self.component_log_densities(x, &mut buf);
        log_sum_exp(&buf)
    }

    pub fn mean_log_likelihood(&self, points: &Points) -> f64 {
        let mut buf = vec![0.0; self.k()];
        let mut total = 0.0;
        for i in 0..points.n() {
            self.component_log_densities(points.row(i), &mut buf);
            total += log_sum_exp(&buf);
        }
        total / points.n() as f64
    }

    /// Free parameters: means and variances per component plus `k - 1`
    /// weights.
    pub fn n_params(&self, dim: usize) -> usize {
        self.k() * 2 * dim + self.k() - 1
    }

    pub fn bic(&self, points: &Points) -> f64 {
        let n = points.n() as f64;
        -2.0 * self.mean_log_likelihood(points) * n + self.n_params(points.dim) as f64 * n.ln()
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// EM from a given start. Returns the model and its final mean
/// log-likelihood.
fn em(points: &Points, mut model: GaussianMixture, settings: &GmmSettings) -> (GaussianMixture, f64) {
    let (n, d) = (points.n(), points.dim);
    let mut resp = vec![0.0; n * model.k()];
    let mut prev = f64::NEG_INFINITY;
    let mut ll = prev;
    for _ in 0..settings.max_iter {
        let k = model.k();
        resp.resize(n * k, 0.0);
        let mut total = 0.0;
        for i in 0..n {
            let r = &mut resp[i * k..(i + 1) * k];
            model.component_log_densities(points.row(i), r);
            let lse = log_sum_exp(r);
            total += lse;
            for v in r.iter_mut() {
                *v = (*v - lse).exp();
            }
        }
        ll = total / n as f64;
        let mut nk = vec![0.0; k];
        let mut means = vec![vec![0.0; d]; k];
        let mut vars = vec![vec![0.0; d]; k];
        for i in 0..n {
            let x = points.row(i);
            for j in 0..k {
                let w = resp[i * k + j];
                nk[j] += w;
                for (m, &xi) in means[j].iter_mut().zip(x) {
                    *m += w * xi;
                }
            }
        }
        for j in 0..k {
            if nk[j] > 0.0 {
                means[j].iter_mut().for_each(|m| *m /= nk[j]);
            }
        }
        for i in 0..n {
            let x = points.row(i);
            for j in 0..k {
                let w = resp[i * k + j];
                for ((v, &xi), &m) in vars[j].iter_mut().zip(x).zip(&means[j]) {
                    *v += w * (xi - m) * (xi - m);
                }
            }
        }
        for j in 0..k {
            for v in vars[j].iter_mut() {
                *v = if nk[j] > 0.0 { *v / nk[j] } else { 1.0 };
                *v = v.max(settings.var_floor);
            }
        }
        model = GaussianMixture {
            weights: nk.iter().map(|c| c / n as f64).collect(),
            means,
            vars,
        };
        if ll - prev < settings.tol {
            break;
        }
        prev = ll;
    }
    (model, ll)
}

fn prune(model: &GaussianMixture) -> Option<GaussianMixture> {
    let keep: Vec<usize> = (0..model.k()).filter(|&j| model.weights[j] >= MIN_WEIGHT).collect();
    if keep.len() == model.k() || keep.is_empty() {
        return None;
    }
    let total: f64 = keep.iter().map(|&j| model.weights[j]).sum();
    Some(GaussianMixture {
        weights: keep.iter().map(|&j| model.weights[j] / total).collect(),
        means: keep.iter().map(|&j| model.means[j].clone()).collect(),
        vars: keep.iter().map(|&j| model.vars[j].clone()).collect(),
    })
}

/// One seeded EM run with `k` components started at `k` distinct rows.
/// Components whose weight collapses are pruned and EM is restarted once.
pub fn fit_gmm(points: &Points, k: usize, seed: u64, settings: &GmmSettings) -> Result<GaussianMixture> {
    let n = points.n();
    if k == 0 || n < k {
        return Err(Error::InvalidInput(format!("cannot fit {k} components to {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<usize> = sample(&mut rng, n, k).into_vec();
    starts.sort_unstable();
    let init = GaussianMixture {
        weights: vec![1.0 / k as f64; k],
        means: starts.iter().map(|&i| points.row(i).to_vec()).collect(),
        vars: vec![vec![1.0; points.dim]; k],
    };
    let (model, _) = em(points, init, settings);
    Ok(match prune(&model) {
        Some(pruned) => em(points, pruned, settings).0,
        None => model,
    })
}

/// Best of `restarts` runs for every `k` up to the maximum, chosen by BIC.
/// Ties go to the smaller `k`.
pub fn select_gmm(points: &Points, settings: &GmmSettings) -> Result<GaussianMixture> {
    let ks: Vec<usize> = (1..=settings.max_components).filter(|&k| k <= points.n()).collect();
    if ks.is_empty() {
        return Err(Error::Empty("no rows to fit a mixture".into()));
    }
    let runs: Vec<(usize, usize)> = ks
        .iter()
        .flat_map(|&k| (0..settings.restarts.max(1)).map(move |r| (k, r)))
        .collect();
    let fitted: Vec<(usize, GaussianMixture, f64)> = runs
        .par_iter()
        .map(|&(k, r)| {
            let seed = settings.seed ^ ((k as u64) << 32) ^ r as u64;
            let m = fit_gmm(points, k, seed, settings)?;
            let ll = m.mean_log_likelihood(points);
            Ok((k, m, ll))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, GaussianMixture)> = None;
    for &k in &ks {
        let run = fitted
            .iter()
            .filter(|(kk, _, _)| *kk == k)
            .fold(None::<&(usize, GaussianMixture, f64)>, |acc, x| match acc {
                Some(a) if a.2 >= x.2 => Some(a),
                _ => Some(x),
            })
            .expect("at least one restart");
        let bic = run.1.bic(points);
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, run.1.clone()));
        }
    }
    Ok(best.expect("nonempty").1)
}

/// Standardized continuous columns, using the real table's moments.
fn standardized(real: &Table, syn: &Table) -> (Points, Points) {
    let cols = real.indices_of(ColumnKind::Continuous);
    let d = cols.len();
    let (nr, ns) = (real.n_rows(), syn.n_rows());
    let mut r = vec![0.0; nr * d];
    let mut s = vec![0.0; ns * d];
    for (k, &c) in cols.iter().enumerate() {
        let rv = real.columns[c].as_continuous().expect("continuous");
        let sv = syn.columns[c].as_continuous().expect("continuous");
        let mean = crate::stats::mean(rv);
        let sd = crate::stats::std_dev(rv);
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for i in 0..nr {
            r[i * d + k] = (rv[i] - mean) / sd;
        }
        for i in 0..ns {
            s[i * d + k] = (sv[i] - mean) / sd;
        }
    }
    (Points { data: r, dim: d }, Points { data: s, dim: d })
}

/// Mean log-likelihood of standardized synthetic rows under a mixture fitted
/// to the standardized real rows.
pub fn gmm_loglik(real: &Table, syn: &Table, settings: &GmmSettings) -> Result<f64> {
    if real.indices_of(ColumnKind::Continuous).is_empty() {
        return Err(Error::InvalidInput("no continuous columns".into()));
    }
    if real.n_rows() < MIN_GMM_ROWS {
        return Err(Error::InvalidInput(format!(
            "mixture needs at least {MIN_GMM_ROWS} real rows, got {}",
            real.n_rows()
        )));
    }
    if syn.n_rows() == 0 {
        return Err(Error::Empty("synthetic table has no rows".into()));
    }
    let (r, s) = standardized(real, syn);
    let model = select_gmm(&r, settings)?;
    Ok(model.mean_log_likelihood(&s))
}
