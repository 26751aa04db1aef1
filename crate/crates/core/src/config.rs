//! Experiment configuration files (TOML).
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/example"
//!
//! [scenario]
//! clients = 20
//! clients_per_round = 4
//! proportions = [4, 3, 3]        # weak : medium : strong
//! distribution = "dirichlet"     # or "iid"
//! alpha = 0.5                    # dirichlet only
//! rounds = 100
//! strategy = "adaptivefl"
//!
//! [model]
//! layer_dims = [16, 32, 32, 32, 64, 64, 64, 64, 8]
//! activation = "relu"            # optional, "relu" or "tanh"
//! tau = 2
//!
//! [pool]
//! p = 3
//! level_ratios = { S = 0.40, M = 0.66, L = 1.0 }
//! start_layers = [4, 3, 2]
//!
//! [train]                        # optional, defaults shown
//! learning_rate = 0.01
//! momentum = 0.5
//! batch_size = 50
//! local_epochs = 5
//!
//! [data]
//! kind = "synthetic"             # or kind = "file" with train/test paths
//! classes = 8
//! features = 16
//! train_points = 2000
//! test_points = 800
//! separation = 1.0
//! ```
//!
//! Unknown keys are rejected and every invariant is checked at parse time.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::federation::{DataDistribution, DataSource, Experiment, PoolConfig, Scenario, Strategy, SyntheticConfig};
use crate::nn::{Activation, ModelSpec, TrainConfig};
use crate::pruning::{build_pool, LevelRatios};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Schema(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    output_dir: PathBuf,
    scenario: RawScenario,
    model: RawModel,
    pool: RawPool,
    #[serde(default)]
    train: RawTrain,
    data: RawData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    clients: usize,
    clients_per_round: usize,
    proportions: [u32; 3],
    distribution: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    rounds: usize,
    strategy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    layer_dims: Vec<usize>,
    #[serde(default)]
    activation: Activation,
    #[serde(default = "default_tau")]
    tau: usize,
}

fn default_tau() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRatios {
    #[serde(rename = "S")]
    small: f64,
    #[serde(rename = "M")]
    medium: f64,
    #[serde(rename = "L", default = "one")]
    large: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPool {
    p: usize,
    level_ratios: RawRatios,
    start_layers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTrain {
    learning_rate: f64,
    momentum: f64,
    batch_size: usize,
    local_epochs: usize,
}

impl Default for RawTrain {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            batch_size: t.batch_size,
            local_epochs: t.local_epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawData {
    Synthetic {
        classes: usize,
        features: usize,
        train_points: usize,
        test_points: usize,
        separation: f64,
    },
    File {
        train: PathBuf,
        test: PathBuf,
    },
}

/// A fully validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
}

/// Reads and validates a configuration file. Relative data paths resolve
/// against the file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
    raw.validate(base_dir)
}

impl RawConfig {
    fn validate(self, base_dir: &Path) -> Result<ExperimentConfig, ConfigError> {
        let s = &self.scenario;
        if s.clients == 0 {
            return Err(invalid("scenario.clients", "must be >= 1"));
        }
        if s.clients_per_round == 0 || s.clients_per_round > s.clients {
            return Err(invalid(
                "scenario.clients_per_round",
                format!("must be in 1..={}, got {}", s.clients, s.clients_per_round),
            ));
        }
        if s.proportions.iter().all(|&p| p == 0) {
            return Err(invalid("scenario.proportions", "at least one class must be nonzero"));
        }
        let distribution = match (s.distribution.as_str(), s.alpha) {
            ("iid", None) => DataDistribution::Iid,
            ("iid", Some(_)) => return Err(invalid("scenario.alpha", "only valid with distribution = \"dirichlet\"")),
            ("dirichlet", Some(alpha)) if alpha > 0.0 && alpha.is_finite() => DataDistribution::Dirichlet { alpha },
            ("dirichlet", Some(alpha)) => return Err(invalid("scenario.alpha", format!("must be > 0, got {alpha}"))),
            ("dirichlet", None) => return Err(invalid("scenario.alpha", "required for distribution = \"dirichlet\"")),
            (other, _) => {
                return Err(invalid(
                    "scenario.distribution",
                    format!("expected \"iid\" or \"dirichlet\", got {other:?}"),
                ))
            }
        };
        let strategy: Strategy = s
            .strategy
            .parse()
            .map_err(|e: crate::Error| invalid("scenario.strategy", e.to_string()))?;

        let m = &self.model;
        if m.layer_dims.len() < 3 || m.layer_dims.contains(&0) {
            return Err(invalid(
                "model.layer_dims",
                format!("need >= 3 positive dims, got {:?}", m.layer_dims),
            ));
        }
        if m.tau < 1 || m.tau >= m.layer_dims.len() - 1 {
            return Err(invalid(
                "model.tau",
                format!("must be in 1..{}, got {}", m.layer_dims.len() - 1, m.tau),
            ));
        }
        let model = ModelSpec {
            layer_dims: m.layer_dims.clone(),
            activation: m.activation,
            tau: m.tau,
        };

        let p = &self.pool;
        let r = &p.level_ratios;
        for v in [r.small, r.medium, r.large] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid("pool.level_ratios", format!("ratios must be in (0, 1], got {v}")));
            }
        }
        if r.large != 1.0 {
            return Err(invalid("pool.level_ratios", "L must be 1.0 (the unpruned model)"));
        }
        if p.p == 0 {
            return Err(invalid("pool.p", "must be >= 1"));
        }
        if p.start_layers.len() != p.p {
            return Err(invalid(
                "pool.start_layers",
                format!("expected {} entries (one per variant), got {}", p.p, p.start_layers.len()),
            ));
        }
        if p.start_layers.windows(2).any(|w| w[0] <= w[1]) {
            return Err(invalid("pool.start_layers", "must be strictly decreasing"));
        }
        if let Some(i) = p.start_layers.iter().find(|&&i| i < m.tau) {
            return Err(invalid("pool.start_layers", format!("{i} is below model.tau = {}", m.tau)));
        }
        let ratios = LevelRatios {
            small: r.small,
            medium: r.medium,
        };
        build_pool(&model, ratios, &p.start_layers).map_err(|e| invalid("pool", e.to_string()))?;

        let t = &self.train;
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return Err(invalid("train.learning_rate", format!("must be > 0, got {}", t.learning_rate)));
        }
        if !(0.0..1.0).contains(&t.momentum) {
            return Err(invalid("train.momentum", format!("must be in [0, 1), got {}", t.momentum)));
        }
        if t.batch_size == 0 {
            return Err(invalid("train.batch_size", "must be >= 1"));
        }
        if t.local_epochs == 0 {
            return Err(invalid("train.local_epochs", "must be >= 1"));
        }

        let data = match &self.data {
            RawData::Synthetic {
                classes,
                features,
                train_points,
                test_points,
                separation,
            } => {
                if *classes != model.classes() {
                    return Err(invalid(
                        "data.classes",
                        format!("{classes} does not match the model's {} outputs", model.classes()),
                    ));
                }
                if *features != model.input_dim() {
                    return Err(invalid(
                        "data.features",
                        format!("{features} does not match the model's {} inputs", model.input_dim()),
                    ));
                }
                if *train_points < s.clients {
                    return Err(invalid("data.train_points", "need at least one point per client"));
                }
                if *test_points == 0 {
                    return Err(invalid("data.test_points", "must be >= 1"));
                }
                if !(*separation >= 0.0 && separation.is_finite()) {
                    return Err(invalid("data.separation", "must be finite and >= 0"));
                }
                DataSource::Synthetic(SyntheticConfig {
                    classes: *classes,
                    features: *features,
                    train_points: *train_points,
                    test_points: *test_points,
                    separation: *separation,
                })
            }
            RawData::File { train, test } => DataSource::Files {
                train: base_dir.join(train),
                test: base_dir.join(test),
            },
        };

        Ok(ExperimentConfig {
            experiment: Experiment {
                scenario: Scenario {
                    n_clients: s.clients,
                    clients_per_round: s.clients_per_round,
                    proportions: s.proportions,
                    distribution,
                    rounds: s.rounds,
                    strategy,
                },
                model,
                pool: PoolConfig {
                    ratios,
                    start_layers: p.start_layers.clone(),
                },
                train: TrainConfig {
                    learning_rate: t.learning_rate,
                    momentum: t.momentum,
                    batch_size: t.batch_size,
                    local_epochs: t.local_epochs,
                    seed: self.seed,
                },
                data,
                seed: self.seed,
            },
            output_dir: self.output_dir,
        })
    }
}

impl ExperimentConfig {
    /// Serializes back to the file format. Data paths are written as
    /// resolved, so parsing the echo yields the same configuration.
    pub fn to_toml(&self) -> String {
        let e = &self.experiment;
        let (distribution, alpha) = match e.scenario.distribution {
            DataDistribution::Iid => ("iid".to_string(), None),
            DataDistribution::Dirichlet { alpha } => ("dirichlet".to_string(), Some(alpha)),
        };
        let data = match &e.data {
            DataSource::Synthetic(c) => RawData::Synthetic {
                classes: c.classes,
                features: c.features,
                train_points: c.train_points,
                test_points: c.test_points,
                separation: c.separation,
            },
            DataSource::Files { train, test } => RawData::File {
                train: train.clone(),
                test: test.clone(),
            },
        };
        let raw = RawConfig {
            seed: e.seed,
            output_dir: self.output_dir.clone(),
            scenario: RawScenario {
                clients: e.scenario.n_clients,
                clients_per_round: e.scenario.clients_per_round,
                proportions: e.scenario.proportions,
                distribution,
                alpha,
                rounds: e.scenario.rounds,
                strategy: e.scenario.strategy.name().to_string(),
            },
            model: RawModel {
                layer_dims: e.model.layer_dims.clone(),
                activation: e.model.activation,
                tau: e.model.tau,
            },
            pool: RawPool {
                p: e.pool.start_layers.len(),
                level_ratios: RawRatios {
                    small: e.pool.ratios.small,
                    medium: e.pool.ratios.medium,
                    large: 1.0,
                },
                start_layers: e.pool.start_layers.clone(),
            },
            train: RawTrain {
                learning_rate: e.train.learning_rate,
                momentum: e.train.momentum,
                batch_size: e.train.batch_size,
                local_epochs: e.train.local_epochs,
            },
            data,
        };
        toml::to_string(&raw).expect("config serializes")
    }

    /// Overrides the seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.experiment.seed = seed;
        self.experiment.train.seed = seed;
    }
}
