use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::copula::CopulaSettings;
use crate::dataset::{ColumnMapping, FixtureProfile, Target};
use crate::error::{Error, Result};
use crate::fidelity::FidelitySettings;
use crate::predictors::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InputSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        mapping: ColumnMapping,
    },
    Fixture {
        n: usize,
        seed: u64,
        #[serde(default)]
        profile: FixtureProfile,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { ratio: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    /// Defaults to the training row count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_synthetic: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityConfig {
    pub tasks: Vec<Target>,
    pub models: Vec<ModelSpec>,
    pub seed: u64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        UtilityConfig {
            tasks: Target::ALL.to_vec(),
            models: ModelSpec::default_roster(),
            seed: 0,
        }
    }
}

/// Everything one pipeline run depends on, seeds included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputSource,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub copula: CopulaSettings,
    #[serde(default)]
    pub generate: GenerateConfig,
    #[serde(default)]
    pub fidelity: FidelitySettings,
    #[serde(default)]
    pub utility: UtilityConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn fixture(n: usize, seed: u64) -> Self {
        RunConfig {
            input: InputSource::Fixture {
                n,
                seed,
                profile: FixtureProfile::default(),
            },
            out_dir: default_out_dir(),
            split: SplitConfig::default(),
            copula: CopulaSettings::default(),
            generate: GenerateConfig::default(),
            fidelity: FidelitySettings::default(),
            utility: UtilityConfig::default(),
        }
        .with_seed(seed)
    }

    /// Sets every seed in the config to `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InputSource::Fixture { seed: s, .. } = &mut self.input {
            *s = seed;
        }
        self.split.seed = seed;
        self.copula.seed = seed;
        self.generate.seed = seed;
        self.fidelity.gmm.seed = seed;
        self.fidelity.detection.seed = seed;
        self.utility.seed = seed;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::{ForestParams, TreeParams};

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::fixture(5000, 11);
        cfg.generate.n_synthetic = Some(300);
        cfg.utility.models = vec![
            ModelSpec::Tree(TreeParams {
                max_depth: None,
                ..TreeParams::default()
            }),
            ModelSpec::Forest(ForestParams::default()),
        ];
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);

        let csv = RunConfig {
            input: InputSource::Csv {
                path: "flights.csv".into(),
                mapping: ColumnMapping::default(),
            },
            ..RunConfig::fixture(10, 1)
        };
        assert_eq!(RunConfig::from_toml(&csv.to_toml().unwrap()).unwrap(), csv);
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml("[input]\nsource = \"fixture\"\nn = 1000\nseed = 3\n").unwrap();
        assert_eq!(cfg.split.ratio, 0.8);
        assert_eq!(cfg.utility.models.len(), 3);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert!(matches!(RunConfig::from_toml("input = 3"), Err(Error::Config(_))));
    }

    #[test]
    fn seed_override_reaches_every_component() {
        let cfg = RunConfig::fixture(10, 1).with_seed(99);
        assert_eq!(
            [cfg.split.seed, cfg.copula.seed, cfg.generate.seed, cfg.fidelity.detection.seed, cfg.utility.seed],
            [99; 5]
        );
    }
}
