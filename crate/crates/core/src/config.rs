//! Experiment configuration: a TOML file with every section optional except
//! `[dataset]`. Unknown keys are rejected and errors name the offending
//! field.
//!
//! ```toml
//! seed = 7
//!
//! [dataset]
//! source = "synthetic"
//!
//! [federation]
//! aggregation_method = "thresholding"
//! rounds = 60
//!
//! [attack]
//! kind = "sign_flip"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::{BaselineParams, Method};
use crate::attack::AttackSpec;
use crate::data::SyntheticSpec;
use crate::detector::{AutoencoderConfig, DetectionConfig};
use crate::error::{Error, Result};
use crate::sim::{FederationConfig, ServerConfig};
use crate::surrogate::SurrogateConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    #[default]
    Synthetic,
    /// Byte image file, see [`crate::data`].
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub source: DatasetSource,
    #[serde(default)]
    pub synthetic: SyntheticSpec,
    /// Image file; required when `source = "image"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn default_test_fraction() -> f64 {
    0.2
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            source: DatasetSource::Synthetic,
            synthetic: SyntheticSpec::default(),
            path: None,
            test_fraction: default_test_fraction(),
        }
    }
}

impl DatasetConfig {
    fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("dataset.test_fraction", "must lie in (0, 1)"));
        }
        match self.source {
            DatasetSource::Synthetic => {
                let s = &self.synthetic;
                if s.classes < 2 {
                    return Err(Error::config("dataset.synthetic.classes", "need at least two classes"));
                }
                if s.samples == 0 || s.input_dim == 0 || s.modes_per_class == 0 {
                    return Err(Error::config("dataset.synthetic", "sizes must be positive"));
                }
                if !(s.separation > 0.0 && s.noise >= 0.0) {
                    return Err(Error::config("dataset.synthetic", "separation must be > 0 and noise >= 0"));
                }
            }
            DatasetSource::Image => {
                if self.path.is_none() {
                    return Err(Error::config("dataset.path", "required for image datasets"));
                }
            }
        }
        Ok(())
    }
}

/// Hidden widths of the client classifier; input and output widths come
/// from the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_sizes: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden_sizes: vec![32, 16] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Root directory; the `FEDWATCH_OUT` environment variable overrides it.
    pub dir: PathBuf,
    /// Accuracy level for the summary's rounds-to-target statistic.
    pub accuracy_target: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs"),
            accuracy_target: 0.8,
        }
    }
}

/// Grid run by `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub methods: Vec<Method>,
    pub attacks: Vec<AttackSpec>,
    /// Also run FedAvg with no abnormal clients.
    pub clean_baseline: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            methods: Method::ALL.to_vec(),
            attacks: vec![
                AttackSpec::SignFlip,
                AttackSpec::AdditiveNoise {
                    noise_std: crate::attack::DEFAULT_NOISE_STD,
                },
                AttackSpec::GradientAscent,
            ],
            clean_baseline: true,
        }
    }
}

fn default_attack() -> AttackSpec {
    AttackSpec::SignFlip
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub federation: FederationConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_attack")]
    pub attack: AttackSpec,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub autoencoder: AutoencoderConfig,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub baselines: BaselineParams,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

impl ExperimentConfig {
    /// Defaults everywhere, synthetic data.
    pub fn new(seed: u64) -> Self {
        ExperimentConfig {
            seed,
            dataset: DatasetConfig::default(),
            federation: FederationConfig::default(),
            model: ModelConfig::default(),
            attack: default_attack(),
            surrogate: SurrogateConfig::default(),
            autoencoder: AutoencoderConfig::default(),
            detection: DetectionConfig::default(),
            baselines: BaselineParams::default(),
            output: OutputConfig::default(),
            compare: CompareConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.federation.validate()?;
        if self.model.hidden_sizes.contains(&0) {
            return Err(Error::config("model.hidden_sizes", "widths must be positive"));
        }
        self.attack.validate()?;
        self.server().validate()?;
        if !(self.output.accuracy_target > 0.0 && self.output.accuracy_target <= 1.0) {
            return Err(Error::config("output.accuracy_target", "must lie in (0, 1]"));
        }
        if self.compare.methods.is_empty() {
            return Err(Error::config("compare.methods", "must not be empty"));
        }
        if self.compare.attacks.is_empty() {
            return Err(Error::config("compare.attacks", "must not be empty"));
        }
        for a in &self.compare.attacks {
            a.validate().map_err(|e| match e {
                Error::Config { field, message } => Error::config(format!("compare.{field}"), message),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Federation settings with the master seed filled in.
    pub fn federation(&self) -> FederationConfig {
        FederationConfig {
            master_seed: self.seed,
            ..self.federation
        }
    }

    pub fn server(&self) -> ServerConfig {
        ServerConfig {
            surrogate: self.surrogate,
            autoencoder: self.autoencoder.clone(),
            detection: self.detection,
            baselines: self.baselines,
        }
    }

    /// Attack label used in outputs: `none` when no client is abnormal.
    pub fn attack_label(&self) -> &'static str {
        if self.federation.attack_quota() == 0 {
            "none"
        } else {
            self.attack.name()
        }
    }

    /// Hex SHA-256 prefix of everything that influences results; the output
    /// location and the compare grid are excluded.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        c.compare = CompareConfig::default();
        hash_json(&c)
    }

    /// Canonical TOML rendering with all defaults spelled out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }
}

pub(crate) fn hash_json<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes to JSON");
    hex::encode(&Sha256::digest(&json)[..8])
}

/// Parses and validates TOML text, applying `overrides` (dotted key, raw
/// value) first. Values are read as TOML and fall back to plain strings, so
/// `--federation.rounds 50` and `--attack.kind sign_flip` both work.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
    for (key, raw) in overrides {
        apply_override(&mut table, key, raw)?;
    }
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(table).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "<root>".to_string() } else { path };
        Error::config(field, e.into_inner().message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_with_overrides(path, &[])
}

pub fn load_config_with_overrides(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

fn override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "malformed override key"));
    }
    let (last, parents) = parts.split_last().expect("non-empty");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::config(key, format!("`{p}` is not a table"))),
        };
    }
    cur.insert(last.to_string(), override_value(raw));
    Ok(())
}
