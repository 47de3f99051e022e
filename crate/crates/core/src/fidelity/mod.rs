//! Twelve-metric fidelity battery comparing a real and a synthetic table.

mod bayes;
mod correlation;
mod detection;
mod gmm;
mod kl;
mod marginal;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use bayes::{bn_loglik, chow_liu_tree, discretize, mutual_information, tree_weight, ChowLiuNetwork, Discretized};
pub use correlation::{
    association, correlation_matrix_score, correlation_preservation, correlation_ratio, cramers_v, kendall_tau,
    matrix_score, mixed_type_score, preservation_from_pairs, CorrelationMethod,
};
pub use detection::{
    auc, detection_from_auc, detection_score, DesignMatrix, DetectionSettings, LogisticModel, MAX_IMBALANCE,
    MIN_DETECTION_ROWS,
};
pub use gmm::{fit_gmm, gmm_loglik, select_gmm, GaussianMixture, GmmSettings, Points, MIN_GMM_ROWS};
pub use kl::{continuous_kl_column, continuous_kl_fidelity, discrete_kl_fidelity, joint_kl_fidelity, kl_divergence, smoothed};
pub use marginal::{chi_squared_codes, chi_squared_score, chi_squared_table, ks_complement, ks_complement_table, ChiSquaredMode};

use crate::error::{Error, Result};
use crate::table::{Column, ColumnKind, Table};

/// Codes of both columns against the union of their observed levels, real
/// levels first. Returns `(real, synthetic, level count)`.
pub(crate) fn align_categorical(real: &Column, syn: &Column) -> (Vec<u32>, Vec<u32>, usize) {
    let mut levels: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut encode = |labels: Vec<&str>| -> Vec<u32> {
        labels
            .into_iter()
            .map(|l| {
                *index.entry(l.to_string()).or_insert_with(|| {
                    levels.push(l.to_string());
                    (levels.len() - 1) as u32
                })
            })
            .collect()
    };
    let r = encode(real.labels().unwrap_or_default());
    let s = encode(syn.labels().unwrap_or_default());
    (r, s, levels.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FidelitySettings {
    pub kl_bins: usize,
    pub bn_bins: usize,
    pub chi_squared: ChiSquaredMode,
    pub gmm: GmmSettings,
    pub detection: DetectionSettings,
}

impl Default for FidelitySettings {
    fn default() -> Self {
        FidelitySettings {
            kl_bins: 20,
            bn_bins: 10,
            chi_squared: ChiSquaredMode::default(),
            gmm: GmmSettings::default(),
            detection: DetectionSettings::default(),
        }
    }
}

/// Scores keyed by their display names; `None` marks a metric that does not
/// apply to the schema.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FidelityReport {
    #[serde(rename = "KS Complement")]
    pub ks_complement: Option<f64>,
    #[serde(rename = "Chi-Squared Test")]
    pub chi_squared: Option<f64>,
    #[serde(rename = "Pearson Correlation")]
    pub pearson_pres: Option<f64>,
    #[serde(rename = "Spearman Correlation")]
    pub spearman_pres: Option<f64>,
    #[serde(rename = "Kendall Correlation")]
    pub kendall_pres: Option<f64>,
    #[serde(rename = "Correlation Matrix")]
    pub corr_matrix_score: Option<f64>,
    #[serde(rename = "Mixed-Type Correlation")]
    pub mixed_type_score: Option<f64>,
    #[serde(rename = "Continuous KL Divergence")]
    pub cont_kl_fidelity: Option<f64>,
    #[serde(rename = "Discrete KL Divergence")]
    pub disc_kl_fidelity: Option<f64>,
    #[serde(rename = "BN Log Likelihood")]
    pub bn_loglik: Option<f64>,
    #[serde(rename = "GM Log Likelihood")]
    pub gmm_loglik: Option<f64>,
    #[serde(rename = "Logistic Detection")]
    pub detection_score: Option<f64>,
}

pub const METRIC_NAMES: [&str; 12] = [
    "KS Complement",
    "Chi-Squared Test",
    "Pearson Correlation",
    "Spearman Correlation",
    "Kendall Correlation",
    "Correlation Matrix",
    "Mixed-Type Correlation",
    "Continuous KL Divergence",
    "Discrete KL Divergence",
    "BN Log Likelihood",
    "GM Log Likelihood",
    "Logistic Detection",
];

impl FidelityReport {
    /// `(name, value)` in display order.
    pub fn entries(&self) -> [(&'static str, Option<f64>); 12] {
        let v = [
            self.ks_complement,
            self.chi_squared,
            self.pearson_pres,
            self.spearman_pres,
            self.kendall_pres,
            self.corr_matrix_score,
            self.mixed_type_score,
            self.cont_kl_fidelity,
            self.disc_kl_fidelity,
            self.bn_loglik,
            self.gmm_loglik,
            self.detection_score,
        ];
        std::array::from_fn(|i| (METRIC_NAMES[i], v[i]))
    }

    /// Metrics bounded to `[0, 1]`; the two log-likelihoods are excluded.
    pub fn bounded(&self) -> Vec<(&'static str, Option<f64>)> {
        self.entries()
            .into_iter()
            .filter(|(n, _)| !n.ends_with("Log Likelihood"))
            .collect()
    }

    pub fn write_json<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer_pretty(sink, self)?;
        Ok(())
    }

    /// One header row of metric names and one row of values, `n/a` where a
    /// metric does not apply.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let entries = self.entries();
        w.write_record(entries.iter().map(|(n, _)| *n))?;
        w.write_record(entries.iter().map(|(_, v)| v.map_or_else(|| "n/a".to_string(), |x| x.to_string())))?;
        w.flush().map_err(|e| Error::io("writing fidelity csv", e))?;
        Ok(())
    }
}

fn when(applies: bool, f: impl FnOnce() -> Result<f64>) -> Result<Option<f64>> {
    if applies {
        f().map(Some)
    } else {
        Ok(None)
    }
}

/// Runs every metric that applies to the shared schema. Metrics are evaluated
/// in parallel; each is deterministic for fixed settings.
pub fn fidelity_report(real: &Table, syn: &Table, settings: &FidelitySettings) -> Result<FidelityReport> {
    real.check_schema(syn)?;
    if real.n_rows() == 0 || syn.n_rows() == 0 {
        return Err(Error::Empty("fidelity needs rows on both sides".into()));
    }
    let n_cont = real.indices_of(ColumnKind::Continuous).len();
    let n_cat = real.indices_of(ColumnKind::Categorical).len();
    let corr = |m: CorrelationMethod| when(n_cont >= 2, || correlation_preservation(real, syn, m));

    let ((ks, chi, pearson), (spearman, kendall, matrix)) = rayon::join(
        || {
            (
                when(n_cont >= 1, || ks_complement_table(real, syn)),
                when(n_cat >= 1, || chi_squared_table(real, syn, settings.chi_squared)),
                corr(CorrelationMethod::Pearson),
            )
        },
        || {
            (
                corr(CorrelationMethod::Spearman),
                corr(CorrelationMethod::Kendall),
                when(n_cont >= 2, || correlation_matrix_score(real, syn)),
            )
        },
    );
    let ((mixed, cont_kl, disc_kl), (bn, (gmm, detection))) = rayon::join(
        || {
            (
                when(real.n_cols() >= 2, || mixed_type_score(real, syn)),
                when(n_cont >= 1, || continuous_kl_fidelity(real, syn, settings.kl_bins)),
                when(n_cat >= 1, || discrete_kl_fidelity(real, syn)),
            )
        },
        || {
            rayon::join(
                || when(real.n_cols() >= 1, || bn_loglik(real, syn, settings.bn_bins)),
                || {
                    rayon::join(
                        || when(n_cont >= 1, || gmm_loglik(real, syn, &settings.gmm)),
                        || detection_score(real, syn, &settings.detection).map(Some),
                    )
                },
            )
        },
    );
    Ok(FidelityReport {
        ks_complement: ks?,
        chi_squared: chi?,
        pearson_pres: pearson?,
        spearman_pres: spearman?,
        kendall_pres: kendall?,
        corr_matrix_score: matrix?,
        mixed_type_score: mixed?,
        cont_kl_fidelity: cont_kl?,
        disc_kl_fidelity: disc_kl?,
        bn_loglik: bn?,
        gmm_loglik: gmm?,
        detection_score: detection?,
    })
}
