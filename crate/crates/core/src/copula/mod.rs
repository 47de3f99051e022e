//! Gaussian copula over mixed continuous/categorical tables.

mod marginal;
mod normal;

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use marginal::{
    fit_family, fit_marginal, CategoricalMarginal, ContinuousMarginal, Distribution, Family, MarginalModel,
    MIN_FIT_VALUES,
};
pub use normal::{phi, phi_inv};

use crate::error::{Error, Result};
use crate::stats::pearson;
use crate::table::{Column, ColumnData, ColumnKind, Table};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const MIN_FIT_ROWS: usize = 100;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CopulaSettings {
    pub epsilon: f64,
    pub families: Vec<Family>,
    /// Seeds the within-interval jitter of categorical cells.
    pub seed: u64,
}

impl Default for CopulaSettings {
    fn default() -> Self {
        CopulaSettings {
            epsilon: DEFAULT_EPSILON,
            families: Family::ALL.to_vec(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnModel {
    pub name: String,
    pub marginal: MarginalModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub format_version: u32,
    pub epsilon: f64,
    pub columns: Vec<ColumnModel>,
    pub dim: usize,
    /// Row-major `dim x dim` correlation of the normal scores.
    pub corr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTable {
    pub table: Table,
    pub seed: u64,
}

impl SyntheticTable {
    pub fn n_rows(&self) -> usize {
        self.table.n_rows()
    }
}

/// Smallest eigenvalue of a symmetric row-major matrix.
pub fn min_eigenvalue(corr: &[f64], dim: usize) -> f64 {
    let m = DMatrix::from_row_slice(dim, dim, corr);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Clips negative eigenvalues to zero and rescales to unit diagonal. Matrices
/// that are already PSD are returned unchanged.
pub fn repair_psd(corr: &[f64], dim: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(dim, dim, corr);
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return corr.to_vec();
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let scale: Vec<f64> = (0..dim).map(|i| rebuilt[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            out[i * dim + j] = if i == j {
                1.0
            } else {
                let v = rebuilt[(i, j)] / (scale[i] * scale[j]);
                let w = rebuilt[(j, i)] / (scale[i] * scale[j]);
                (0.5 * (v + w)).clamp(-1.0, 1.0)
            };
        }
    }
    out
}

fn fit_column(column: &Column, settings: &CopulaSettings) -> Result<MarginalModel> {
    Ok(match &column.data {
        ColumnData::Continuous(values) => MarginalModel::Continuous(
            fit_marginal(values, &settings.families)
                .map_err(|e| Error::InvalidInput(format!("column {}: {e}", column.name)))?,
        ),
        ColumnData::Categorical { levels, codes } => {
            let m = CategoricalMarginal::fit(levels, codes)?;
            if m.is_degenerate() {
                log::warn!("column {} has a single category; its correlation row is set to identity", column.name);
            }
            MarginalModel::Categorical(m)
        }
    })
}

/// Normal scores of one column. Degenerate columns yield `None`.
fn normal_scores(column: &Column, marginal: &MarginalModel, eps: f64, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    if marginal.is_degenerate() {
        return None;
    }
    let clip = |u: f64| phi_inv(u.clamp(eps, 1.0 - eps));
    match (&column.data, marginal) {
        (ColumnData::Continuous(values), MarginalModel::Continuous(m)) => {
            Some(values.iter().map(|&x| clip(m.cdf(x))).collect())
        }
        (ColumnData::Categorical { levels, codes }, MarginalModel::Categorical(m)) => {
            let remap: Vec<Option<usize>> = levels.iter().map(|l| m.code_of(l)).collect();
            Some(
                codes
                    .iter()
                    .map(|&c| {
                        let (lo, hi) = m.interval(remap[c as usize].expect("level observed during fit"));
                        clip(lo + (hi - lo) * rng.random::<f64>())
                    })
                    .collect(),
            )
        }
        _ => unreachable!("marginal kind follows column kind"),
    }
}

/// Fits per-column marginals and the normal-score correlation matrix.
pub fn fit_copula(table: &Table, settings: &CopulaSettings) -> Result<CopulaModel> {
    let d = table.n_cols();
    if d < 2 {
        return Err(Error::InvalidInput(format!("copula needs at least 2 columns, got {d}")));
    }
    if table.n_rows() < MIN_FIT_ROWS {
        return Err(Error::InvalidInput(format!(
            "copula needs at least {MIN_FIT_ROWS} rows, got {}",
            table.n_rows()
        )));
    }
    if !(settings.epsilon > 0.0 && settings.epsilon < 0.5) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 0.5), got {}", settings.epsilon)));
    }
    let marginals: Vec<MarginalModel> = table
        .columns
        .par_iter()
        .map(|c| fit_column(c, settings))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let scores: Vec<Option<Vec<f64>>> = table
        .columns
        .iter()
        .zip(&marginals)
        .map(|(c, m)| normal_scores(c, m, settings.epsilon, &mut rng))
        .collect();

    let mut corr = vec![0.0; d * d];
    for i in 0..d {
        corr[i * d + i] = 1.0;
        for j in (i + 1)..d {
            let r = match (&scores[i], &scores[j]) {
                (Some(a), Some(b)) => pearson(a, b).unwrap_or(0.0),
                _ => 0.0,
            };
            corr[i * d + j] = r;
            corr[j * d + i] = r;
        }
    }
    let min_eig = min_eigenvalue(&corr, d);
    if min_eig < 0.0 {
        log::warn!("normal-score correlation has min eigenvalue {min_eig:.3e}; repairing");
        corr = repair_psd(&corr, d);
    }
    Ok(CopulaModel {
        format_version: FORMAT_VERSION,
        epsilon: settings.epsilon,
        columns: table
            .columns
            .iter()
            .zip(marginals)
            .map(|(c, marginal)| ColumnModel {
                name: c.name.clone(),
                marginal,
            })
            .collect(),
        dim: d,
        corr,
    })
}

impl CopulaModel {
    pub fn corr_at(&self, i: usize, j: usize) -> f64 {
        self.corr[i * self.dim + j]
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn schema(&self) -> Vec<(String, ColumnKind)> {
        self.columns
            .iter()
            .map(|c| {
                let kind = match c.marginal {
                    MarginalModel::Continuous(_) => ColumnKind::Continuous,
                    MarginalModel::Categorical(_) => ColumnKind::Categorical,
                };
                (c.name.clone(), kind)
            })
            .collect()
    }

    /// Lower factor `L` with `L Lᵀ = R`: Cholesky, or the symmetric
    /// eigen square root when Cholesky fails.
    fn factor(&self) -> DMatrix<f64> {
        let r = DMatrix::from_row_slice(self.dim, self.dim, &self.corr);
        if let Some(ch) = r.clone().cholesky() {
            return ch.l();
        }
        let eig = SymmetricEigen::new(r);
        let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
    }

    /// Draws `n` rows. Bit-reproducible per `(model, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SyntheticTable> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be at least 1".into()));
        }
        let d = self.dim;
        let l = self.factor();
        let eps = self.epsilon;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = vec![vec![0.0; n]; d];
        let mut w = vec![0.0; d];
        for row in 0..n {
            for wi in w.iter_mut() {
                *wi = rng.sample(StandardNormal);
            }
            for i in 0..d {
                let z: f64 = (0..d).map(|k| l[(i, k)] * w[k]).sum();
                u[i][row] = phi(z).clamp(eps, 1.0 - eps);
            }
        }
        let columns = self
            .columns
            .iter()
            .zip(u)
            .map(|(c, us)| match &c.marginal {
                MarginalModel::Continuous(m) => Column::continuous(&c.name, us.iter().map(|&u| m.decode(u)).collect()),
                MarginalModel::Categorical(m) => Column {
                    name: c.name.clone(),
                    data: ColumnData::Categorical {
                        levels: m.levels.clone(),
                        codes: us.iter().map(|&u| m.lookup(u) as u32).collect(),
                    },
                },
            })
            .collect();
        Ok(SyntheticTable {
            table: Table::new(columns)?,
            seed,
        })
    }

    pub fn save<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer_pretty(sink, self)?;
        Ok(())
    }

    pub fn load<R: Read>(source: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(source)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found,
                expected: FORMAT_VERSION,
            });
        }
        let model: CopulaModel = serde_json::from_value(value)?;
        if model.corr.len() != model.dim * model.dim || model.columns.len() != model.dim {
            return Err(Error::DimensionMismatch {
                expected: model.dim * model.dim,
                actual: model.corr.len(),
            });
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_two_sample, mean};
    use crate::table::LevelOrder;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn two_continuous(x: Vec<f64>, y: Vec<f64>) -> Table {
        Table::new(vec![Column::continuous("x", x), Column::continuous("y", y)]).unwrap()
    }

    #[test]
    fn identical_columns_fully_correlated() {
        let x = normals(2000, 1);
        let model = fit_copula(&two_continuous(x.clone(), x), &CopulaSettings::default()).unwrap();
        assert!(model.corr_at(0, 1) >= 0.99);
        let syn = model.sample(10_000, 3).unwrap();
        let (a, b) = (
            syn.table.columns[0].as_continuous().unwrap(),
            syn.table.columns[1].as_continuous().unwrap(),
        );
        assert!(pearson(a, b).unwrap() >= 0.98);
    }

    #[test]
    fn independent_columns_near_identity() {
        let model = fit_copula(
            &two_continuous(normals(10_000, 1), normals(10_000, 2)),
            &CopulaSettings::default(),
        )
        .unwrap();
        assert!(model.corr_at(0, 1).abs() <= 0.05);
    }

    #[test]
    fn uniform_binary_category_with_independent_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels: Vec<&str> = (0..10_000).map(|_| if rng.random::<bool>() { "A" } else { "B" }).collect();
        let t = Table::new(vec![
            Column::categorical("c", &labels, LevelOrder::FirstAppearance),
            Column::continuous("x", normals(10_000, 6)),
        ])
        .unwrap();
        let model = fit_copula(&t, &CopulaSettings::default()).unwrap();
        assert!(model.corr_at(0, 1).abs() <= 0.05);
    }

    #[test]
    fn identity_model_gaussian_mean() {
        let model = CopulaModel {
            format_version: FORMAT_VERSION,
            epsilon: DEFAULT_EPSILON,
            columns: vec![
                ColumnModel {
                    name: "x".into(),
                    marginal: MarginalModel::Continuous(ContinuousMarginal {
                        distribution: Distribution::Gaussian { mean: 3.0, sd: 1.0 },
                        ks_stat: 0.0,
                        min: f64::NEG_INFINITY,
                        max: f64::INFINITY,
                        integral: false,
                    }),
                },
                ColumnModel {
                    name: "y".into(),
                    marginal: MarginalModel::Continuous(ContinuousMarginal {
                        distribution: Distribution::Uniform { low: 0.0, high: 1.0 },
                        ks_stat: 0.0,
                        min: 0.0,
                        max: 1.0,
                        integral: false,
                    }),
                },
            ],
            dim: 2,
            corr: vec![1.0, 0.0, 0.0, 1.0],
        };
        let n = 10_000;
        let syn = model.sample(n, 11).unwrap();
        let m = mean(syn.table.columns[0].as_continuous().unwrap());
        assert!((m - 3.0).abs() <= 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn categorical_frequencies_reproduced() {
        let labels: Vec<&str> = (0..1000).map(|i| if i % 10 < 7 { "A" } else { "B" }).collect();
        let t = Table::new(vec![
            Column::categorical("c", &labels, LevelOrder::FirstAppearance),
            Column::continuous("x", normals(1000, 9)),
        ])
        .unwrap();
        let model = fit_copula(&t, &CopulaSettings::default()).unwrap();
        let syn = model.sample(100_000, 2).unwrap();
        let labels = syn.table.columns[0].labels().unwrap();
        let freq_a = labels.iter().filter(|&&l| l == "A").count() as f64 / 100_000.0;
        assert!((freq_a - 0.7).abs() <= 0.02, "{freq_a}");
    }

    #[test]
    fn constant_category_gets_identity_row() {
        let t = Table::new(vec![
            Column::categorical("c", &vec!["A"; 200], LevelOrder::FirstAppearance),
            Column::continuous("x", normals(200, 1)),
            Column::continuous("y", normals(200, 2)),
        ])
        .unwrap();
        let model = fit_copula(&t, &CopulaSettings::default()).unwrap();
        assert_eq!(model.corr_at(0, 1), 0.0);
        assert_eq!(model.corr_at(0, 2), 0.0);
        assert_eq!(model.corr_at(0, 0), 1.0);
        let syn = model.sample(50, 1).unwrap();
        assert!(syn.table.columns[0].labels().unwrap().iter().all(|&l| l == "A"));
    }

    #[test]
    fn preconditions() {
        let s = CopulaSettings::default();
        assert!(fit_copula(&two_continuous(normals(99, 1), normals(99, 2)), &s).is_err());
        let one = Table::new(vec![Column::continuous("x", normals(200, 1))]).unwrap();
        assert!(fit_copula(&one, &s).is_err());
        let model = fit_copula(&two_continuous(normals(200, 1), normals(200, 2)), &s).unwrap();
        assert!(model.sample(0, 1).is_err());
    }

    #[test]
    fn repair_yields_psd_unit_diagonal() {
        // Pairwise-valid but jointly infeasible correlations.
        let bad = vec![1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0];
        assert!(min_eigenvalue(&bad, 3) < 0.0);
        let fixed = repair_psd(&bad, 3);
        assert!(min_eigenvalue(&fixed, 3) >= -1e-10);
        for i in 0..3 {
            assert_eq!(fixed[i * 3 + i], 1.0);
            for j in 0..3 {
                assert_eq!(fixed[i * 3 + j], fixed[j * 3 + i]);
            }
        }
        let ok = vec![1.0, 0.3, 0.3, 1.0];
        assert_eq!(repair_psd(&ok, 2), ok);
    }

    #[test]
    fn singular_correlation_falls_back_to_eigen_factor() {
        let x = normals(500, 1);
        let model = fit_copula(&two_continuous(x.clone(), x), &CopulaSettings::default()).unwrap();
        let mut m = model.clone();
        m.corr = vec![1.0, 1.0, 1.0, 1.0];
        let syn = m.sample(1000, 2).unwrap();
        let (a, b) = (
            syn.table.columns[0].as_continuous().unwrap(),
            syn.table.columns[1].as_continuous().unwrap(),
        );
        assert!(pearson(a, b).unwrap() > 0.999);
    }

    #[test]
    fn sampling_is_reproducible_and_persistence_round_trips() {
        let model = fit_copula(
            &two_continuous(normals(300, 1), normals(300, 2).iter().map(|v| v.exp()).collect()),
            &CopulaSettings::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        model.save(&mut buf).unwrap();
        let back = CopulaModel::load(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        assert_eq!(model.sample(500, 7).unwrap(), back.sample(500, 7).unwrap());
        assert_ne!(model.sample(500, 7).unwrap(), model.sample(500, 8).unwrap());

        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        v["format_version"] = 99.into();
        match CopulaModel::load(v.to_string().as_bytes()) {
            Err(Error::UnsupportedVersion { found: 99, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn skewed_marginal_preserved() {
        let x: Vec<f64> = normals(5000, 3).iter().map(|v| (0.5 * v).exp() * 10.0).collect();
        let y = normals(5000, 4);
        let t = two_continuous(x.clone(), y);
        let model = fit_copula(&t, &CopulaSettings::default()).unwrap();
        let syn = model.sample(10_000, 5).unwrap();
        let ks: f64 = ks_two_sample(&x, syn.table.columns[0].as_continuous().unwrap()).unwrap();
        assert!(ks <= 0.05, "{ks}");
    }
}
