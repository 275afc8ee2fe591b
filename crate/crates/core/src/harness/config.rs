use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusteringConfig;
use crate::data::{PartitionMode, PartitionSpec};
use crate::error::{Error, Result};
use crate::gossip::{CostModel, GossipConfig};
use crate::model::{ModelShape, OptimiserConfig, TrainConfig};
use crate::sim::FieldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dfl,
    Cfl,
    LocalOnly,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dfl => "dfl",
            Method::Cfl => "cfl",
            Method::LocalOnly => "local-only",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dfl" => Ok(Method::Dfl),
            "cfl" => Ok(Method::Cfl),
            "local-only" => Ok(Method::LocalOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?}; expected dfl, cfl or local-only"
            ))),
        }
    }
}

/// Synthetic blobs, or a CSV file of `features..., label` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(default = "default_classes")]
    pub class_count: usize,
    #[serde(default = "default_per_class")]
    pub per_class: usize,
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn default_classes() -> usize {
    10
}
fn default_per_class() -> usize {
    600
}
fn default_input_dim() -> usize {
    16
}
fn default_spread() -> f64 {
    1.0
}
fn default_test_fraction() -> f64 {
    0.2
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            class_count: default_classes(),
            per_class: default_per_class(),
            input_dim: default_input_dim(),
            spread: default_spread(),
            test_fraction: default_test_fraction(),
            csv: None,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.csv.is_none() && (self.class_count < 2 || self.per_class == 0 || self.input_dim == 0) {
            return Err(Error::InvalidConfig(
                "data needs at least 2 classes, 1 sample per class and 1 feature".into(),
            ));
        }
        if !(self.spread.is_finite() && self.spread >= 0.0) {
            return Err(Error::InvalidConfig(format!("spread must be >= 0, got {}", self.spread)));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelConfig {
    /// 0 selects multinomial logistic regression.
    #[serde(default)]
    pub hidden_dim: usize,
}

impl ModelConfig {
    pub fn shape(&self, input_dim: usize, num_classes: usize) -> ModelShape {
        if self.hidden_dim == 0 {
            ModelShape::softmax(input_dim, num_classes)
        } else {
            ModelShape::mlp(input_dim, self.hidden_dim, num_classes)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub rounds: usize,
    pub method: Method,
    pub field: FieldConfig,
    pub partition: PartitionSpec,
    #[serde(default)]
    pub gossip: GossipConfig,
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub optimiser: OptimiserConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        self.field.validate()?;
        self.partition.validate()?;
        self.gossip.validate()?;
        self.clustering.validate(self.field.device_count)?;
        self.optimiser.validate()?;
        self.training.validate()?;
        self.data.validate()?;
        if self.data.csv.is_none() {
            let train_per_class = self.data.per_class - (self.data.per_class as f64 * self.data.test_fraction).round() as usize;
            if self.partition.mode == PartitionMode::Iid && self.field.device_count > train_per_class {
                return Err(Error::InvalidConfig(format!(
                    "IID split of {train_per_class} training samples per class cannot cover {} devices",
                    self.field.device_count
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("cannot serialise config: {e}")))
    }
}
