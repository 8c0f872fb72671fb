//! Experiment configuration: one flat TOML document of typed keys.
//!
//! See the repository README for the full key list. Unknown keys are
//! rejected so typos fail loudly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::protocol::BidForm;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Budgeted regime: `T = d^2`, epsilons from the schedule.
    Theory,
    /// Field regime: long first release, short subsequent ones.
    Practical,
    /// Exact means, deterministic auction; no privacy accounting.
    NoiseOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Greedy,
    Private,
    Uniform,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::Private => "private",
            Algorithm::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Csv,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    // ---- data ----
    pub source: DataSource,
    /// Synthetic: feature dimension.
    #[serde(default)]
    pub dim: usize,
    /// Synthetic: points per owner.
    #[serde(default)]
    pub owner_sizes: Vec<usize>,
    /// Synthetic: per-owner Gaussian means (one vector per owner).
    #[serde(default)]
    pub owner_means: Vec<Vec<f64>>,
    /// Synthetic: per-owner Gaussian standard deviations.
    #[serde(default)]
    pub owner_stds: Vec<Vec<f64>>,
    #[serde(default)]
    pub validation_size: usize,
    #[serde(default)]
    pub validation_mean: Vec<f64>,
    #[serde(default)]
    pub validation_std: Vec<f64>,
    /// CSV: training data path.
    #[serde(default)]
    pub csv_path: String,
    /// CSV: validation data path.
    #[serde(default)]
    pub validation_csv_path: String,
    #[serde(default = "default_true")]
    pub csv_has_header: bool,
    /// CSV: owner fractions of the training file.
    #[serde(default)]
    pub split_fractions: Vec<f64>,
    /// Z-score all features using validation-set statistics only.
    #[serde(default)]
    pub standardize: bool,

    // ---- protocol ----
    pub mode: Mode,
    pub gamma: f64,
    pub rff_dim: usize,
    #[serde(default = "defaults::bid_form")]
    pub bid_form: BidForm,
    #[serde(default = "defaults::events_per_iter")]
    pub events_per_iter: u8,
    /// Quantization step; 0 means the default `1/d`.
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "defaults::seed_size")]
    pub seed_size: usize,
    #[serde(default = "defaults::seed_scale")]
    pub seed_scale: f64,

    // theory-mode budget
    #[serde(default = "defaults::eps_target")]
    pub eps_target: f64,
    #[serde(default = "defaults::delta_tilde")]
    pub delta_tilde: f64,

    // practical-mode epsilons
    #[serde(default = "defaults::eps_v")]
    pub eps_v: f64,
    #[serde(default = "defaults::eps_first")]
    pub eps_first: f64,
    #[serde(default = "defaults::eps_base")]
    pub eps_base: f64,
    #[serde(default = "defaults::t_subs")]
    pub t_subs: usize,
    #[serde(default = "defaults::eps_auc")]
    pub eps_auc: f64,
    /// Forced-request threshold; 0 means the default `K^(2/3)`.
    #[serde(default)]
    pub tau: usize,

    // ---- run ----
    pub algs: Vec<Algorithm>,
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub master_seed: u64,
    pub out_dir: String,
    /// Also write full per-run ledger event dumps as JSON.
    #[serde(default)]
    pub dump_ledgers: bool,
    /// Also write per-epoch trace CSVs for private runs.
    #[serde(default = "default_true")]
    pub write_traces: bool,
}

mod defaults {
    use crate::protocol::BidForm;

    pub fn bid_form() -> BidForm {
        BidForm::Derived
    }
    pub fn events_per_iter() -> u8 {
        2
    }
    pub fn seed_size() -> usize {
        20
    }
    pub fn seed_scale() -> f64 {
        3.0
    }
    pub fn eps_target() -> f64 {
        1.0
    }
    pub fn delta_tilde() -> f64 {
        1e-4
    }
    pub fn eps_v() -> f64 {
        0.01
    }
    pub fn eps_first() -> f64 {
        0.05
    }
    pub fn eps_base() -> f64 {
        0.01
    }
    pub fn t_subs() -> usize {
        5
    }
    pub fn eps_auc() -> f64 {
        0.5
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|s| *s == 0) {
            return Err(Error::Config("sizes must be positive".into()));
        }
        if self.algs.is_empty() {
            return Err(Error::Config("no algorithms enabled".into()));
        }
        if self.gamma <= 0.0 {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if self.rff_dim == 0 {
            return Err(Error::Config("rff_dim must be positive".into()));
        }
        match self.source {
            DataSource::Synthetic => {
                if self.dim == 0 || self.owner_sizes.is_empty() {
                    return Err(Error::Config(
                        "synthetic source needs dim and owner_sizes".into(),
                    ));
                }
                if self.owner_means.len() != self.owner_sizes.len()
                    || self.owner_stds.len() != self.owner_sizes.len()
                {
                    return Err(Error::Config(
                        "owner_means/owner_stds must match owner_sizes".into(),
                    ));
                }
                if self.validation_size == 0 {
                    return Err(Error::Config("validation_size must be positive".into()));
                }
            }
            DataSource::Csv => {
                if self.csv_path.is_empty() || self.validation_csv_path.is_empty() {
                    return Err(Error::Config(
                        "csv source needs csv_path and validation_csv_path".into(),
                    ));
                }
                if self.split_fractions.is_empty() {
                    return Err(Error::Config("csv source needs split_fractions".into()));
                }
            }
        }
        Ok(())
    }

    pub fn owner_count(&self) -> usize {
        match self.source {
            DataSource::Synthetic => self.owner_sizes.len(),
            DataSource::Csv => self.split_fractions.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
source = "synthetic"
dim = 2
owner_sizes = [10, 10]
owner_means = [[-3.0, -3.0], [3.0, 3.0]]
owner_stds = [[1.0, 1.0], [1.0, 1.0]]
validation_size = 8
validation_mean = [3.0, 3.0]
validation_std = [1.0, 1.0]
mode = "practical"
gamma = 0.1
rff_dim = 16
algs = ["greedy", "private", "uniform"]
sizes = [4]
repetitions = 2
master_seed = 7
out_dir = "out"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.owner_count(), 2);
        assert_eq!(cfg.events_per_iter, 2);
        assert_eq!(cfg.t_subs, 5);
        assert_eq!(cfg.bid_form, BidForm::Derived);
        assert!(cfg.write_traces);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\nbogus_key = 3\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn missing_required_keys_fail() {
        assert!(ExperimentConfig::from_toml_str("source = \"csv\"").is_err());
    }
}
