//! TOML experiment configuration.
//!
//! ```toml
//! runs = 10
//! out_dir = "out/pima"
//!
//! [dataset]
//! kind = "csv"
//! path = "../data/pima/pima.csv"
//!
//! [train]
//! layer_sizes = [8, 10, 10]
//! latent_dim = 4
//! gamma = "auto"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use dasvdd_core::{Gamma, InitScheme, TrainConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocess {
    #[default]
    None,
    Standardize,
    Gcn,
}

fn default_test_fraction() -> f64 {
    0.2
}

fn standardize() -> Preprocess {
    Preprocess::Standardize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// A predefined train/test partition of multiclass IDX files; one class
    /// is normal.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Seeded subsample of the training normals, per run.
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        preprocess: Preprocess,
    },
    /// A single CSV labeled 0/1 (or multiclass with `normal_class`), split
    /// per run into training normals and a test set.
    Csv {
        path: PathBuf,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default = "standardize")]
        preprocess: Preprocess,
    },
    /// Two Gaussian blobs in the plane.
    Toy {
        normals: usize,
        anomalies: usize,
        #[serde(default)]
        data_seed: u64,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        preprocess: Preprocess,
    },
}

impl DatasetSpec {
    pub fn name(&self) -> String {
        let stem = |p: &Path| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        };
        match self {
            DatasetSpec::Idx { train_images, .. } => {
                let dir = train_images.parent().and_then(Path::file_name);
                dir.map(|d| d.to_string_lossy().into_owned())
                    .unwrap_or_else(|| stem(train_images))
            }
            DatasetSpec::Csv { path, .. } => stem(path),
            DatasetSpec::Toy { .. } => "toy".to_string(),
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => {
                vec![train_images, train_labels, test_images, test_labels]
            }
            DatasetSpec::Csv { path, .. } => vec![path],
            DatasetSpec::Toy { .. } => Vec::new(),
        }
    }

    pub fn paths(&self) -> Vec<&Path> {
        match self {
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => {
                vec![train_images, train_labels, test_images, test_labels]
            }
            DatasetSpec::Csv { path, .. } => vec![path],
            DatasetSpec::Toy { .. } => Vec::new(),
        }
    }
}

/// `"auto"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSetting {
    Fixed(f64),
    Named(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

impl GammaSetting {
    pub const AUTO: Self = GammaSetting::Named(AutoKeyword::Auto);

    pub fn to_gamma(self) -> Gamma {
        match self {
            GammaSetting::Fixed(g) => Gamma::Fixed(g),
            GammaSetting::Named(AutoKeyword::Auto) => Gamma::Auto,
        }
    }
}

impl Default for GammaSetting {
    fn default() -> Self {
        Self::AUTO
    }
}

impl std::str::FromStr for GammaSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::AUTO);
        }
        match s.parse::<f64>() {
            Ok(g) if g > 0.0 && g.is_finite() => Ok(GammaSetting::Fixed(g)),
            _ => Err(format!(
                "gamma must be \"auto\" or a positive number, got {s:?}"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    #[default]
    HeUniform,
    FanInUniform,
}

impl From<InitName> for InitScheme {
    fn from(n: InitName) -> Self {
        match n {
            InitName::HeUniform => InitScheme::HeUniform,
            InitName::FanInUniform => InitScheme::FanInUniform,
        }
    }
}

/// Mirrors [`TrainConfig`]; omitted keys take its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub layer_sizes: Vec<usize>,
    pub latent_dim: usize,
    pub gamma: GammaSetting,
    pub kappa: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_lr: f64,
    pub adagrad_lr: f64,
    pub adagrad_decay: f64,
    pub weight_decay: f64,
    pub gamma_repeats: usize,
    pub seed: u64,
    pub leaky_slope: f64,
    pub init: InitName,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::new(Vec::new(), 0);
        Self {
            layer_sizes: d.layer_sizes,
            latent_dim: d.latent_dim,
            gamma: GammaSetting::AUTO,
            kappa: d.kappa,
            batch_size: d.batch_size,
            epochs: d.epochs,
            adam_lr: d.adam_lr,
            adagrad_lr: d.adagrad_lr,
            adagrad_decay: d.adagrad_decay,
            weight_decay: d.weight_decay,
            gamma_repeats: d.gamma_repeats,
            seed: d.seed,
            leaky_slope: d.leaky_slope,
            init: InitName::HeUniform,
        }
    }
}

impl TrainSection {
    /// The core configuration for one run, seeded with `seed`.
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma.to_gamma(),
            kappa: self.kappa,
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam_lr: self.adam_lr,
            adagrad_lr: self.adagrad_lr,
            adagrad_decay: self.adagrad_decay,
            weight_decay: self.weight_decay,
            gamma_repeats: self.gamma_repeats,
            seed,
            layer_sizes: self.layer_sizes.clone(),
            latent_dim: self.latent_dim,
            leaky_slope: self.leaky_slope,
            init: self.init.into(),
        }
    }
}

fn default_runs() -> usize {
    10
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_extremes() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Class treated as normal; every other label is an anomaly. Required for
    /// IDX data. For CSV and toy data, omitting it means labels are already
    /// 0 (normal) / 1 (anomaly).
    #[serde(default)]
    pub normal_class: Option<i64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Not echoed into summaries, so relocating an experiment does not change
    /// its outputs.
    #[serde(default = "default_out_dir", skip_serializing)]
    pub out_dir: PathBuf,
    /// Number of lowest and highest scoring test samples dumped per run.
    #[serde(default = "default_extremes")]
    pub extremes: usize,
    pub train: TrainSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads, parses and validates a config file, resolving relative paths
    /// against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(e),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self.dataset.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if self.out_dir.is_relative() {
            self.out_dir = base.join(&self.out_dir);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.runs == 0 {
            return invalid("runs must be at least 1");
        }
        if self.train.layer_sizes.is_empty() || self.train.latent_dim == 0 {
            return invalid("train.layer_sizes and train.latent_dim are required");
        }
        if let GammaSetting::Fixed(g) = self.train.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return invalid("train.gamma must be \"auto\" or a positive number");
            }
        }
        self.train
            .to_train_config(self.train.seed)
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("train: {e}")))?;
        match &self.dataset {
            DatasetSpec::Idx { train_limit, .. } => {
                if self.normal_class.is_none() {
                    return invalid("normal_class is required for idx datasets");
                }
                if *train_limit == Some(0) {
                    return invalid("dataset.train_limit must be positive");
                }
            }
            DatasetSpec::Csv { test_fraction, .. } | DatasetSpec::Toy { test_fraction, .. } => {
                if !(0.0..1.0).contains(test_fraction) {
                    return invalid("dataset.test_fraction must lie in [0, 1)");
                }
            }
        }
        if let Some(p) = self.dataset.paths().into_iter().find(|p| !p.is_file()) {
            return Err(ConfigError::MissingFile(p.to_path_buf()));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        match self.normal_class {
            Some(k) => format!("{}-class{k}", self.dataset.name()),
            None => self.dataset.name(),
        }
    }
}
