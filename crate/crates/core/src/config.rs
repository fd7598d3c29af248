//! Flat key-value configuration files.
//!
//! Both the reward configuration and the training run configuration are
//! TOML documents with top-level scalar keys only:
//!
//! ```toml
//! lambda1 = 1.0
//! eta = 0.8
//! kappa = 2
//! seed = 42
//! learning_rate = 2.0
//! ```
//!
//! Absent keys take their stock defaults, unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grpo::GrpoConfig;
use crate::reward::RewardWeights;
use crate::simenv::EnvConfig;
use crate::transcript::ToolRegistry;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldError>),
}

/// Raw file contents; every key optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub lambda4: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub kappa: Option<i64>,
    pub eta: Option<f64>,
    pub s: Option<f64>,
    pub n_norm: Option<f64>,
    pub seed: Option<u64>,
    pub iterations: Option<i64>,
    pub batch: Option<i64>,
    pub g: Option<i64>,
    pub max_turns: Option<i64>,
    pub learning_rate: Option<f64>,
    pub eps_low: Option<f64>,
    pub eps_high: Option<f64>,
    pub psi: Option<f64>,
    pub delta: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Everything a training run needs; identical configs give identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub iterations: usize,
    /// Prompts per iteration.
    pub batch: usize,
    pub max_turns: usize,
    pub reward: RewardWeights,
    pub grpo: GrpoConfig,
    pub env: EnvConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            iterations: 100,
            batch: 64,
            max_turns: 16,
            reward: RewardWeights::default(),
            grpo: GrpoConfig::default(),
            env: EnvConfig::default(),
        }
    }
}

fn count(field: &str, value: Option<i64>, default: usize, min: i64, errors: &mut Vec<FieldError>) -> usize {
    match value {
        None => default,
        Some(v) if v >= min => v as usize,
        Some(v) => {
            errors.push(FieldError::new(field, format!("must be an integer >= {min}, got {v}")));
            default
        }
    }
}

impl RunConfig {
    pub fn from_file(file: &ConfigFile) -> Result<Self, ConfigError> {
        let d = RunConfig::default();
        let mut errors = Vec::new();

        let mut reward = d.reward.clone();
        reward.lambda1 = file.lambda1.unwrap_or(reward.lambda1);
        reward.lambda2 = file.lambda2.unwrap_or(reward.lambda2);
        reward.lambda3 = file.lambda3.unwrap_or(reward.lambda3);
        reward.lambda4 = file.lambda4.unwrap_or(reward.lambda4);
        reward.c1 = file.c1.unwrap_or(reward.c1);
        reward.c2 = file.c2.unwrap_or(reward.c2);
        reward.structure.alpha = file.alpha.unwrap_or(reward.structure.alpha);
        reward.structure.gamma = file.gamma.unwrap_or(reward.structure.gamma);
        reward.beta = file.beta.unwrap_or(reward.beta);
        reward.eta = file.eta.unwrap_or(reward.eta);
        reward.s = file.s.unwrap_or(reward.s);
        reward.n_norm = file.n_norm;
        match file.kappa {
            None => {}
            Some(k) if (1..=i64::from(u32::MAX)).contains(&k) => reward.kappa = k as u32,
            Some(k) => errors.push(FieldError::new("kappa", format!("must be an integer >= 1, got {k}"))),
        }
        if let Err(mut e) = reward.validate() {
            // kappa was already reported above
            e.retain(|f| f.field != "kappa");
            errors.extend(e);
        }
        if reward.effective_n_norm() == 0.0 {
            errors.push(FieldError::new("n_norm", "normalization factor evaluates to zero"));
        }

        let grpo = GrpoConfig {
            group_size: count("g", file.g, d.grpo.group_size, 2, &mut errors),
            eps_low: file.eps_low.unwrap_or(d.grpo.eps_low),
            eps_high: file.eps_high.unwrap_or(d.grpo.eps_high),
            psi: file.psi.unwrap_or(d.grpo.psi),
            delta: file.delta.unwrap_or(d.grpo.delta),
            learning_rate: file.learning_rate.unwrap_or(d.grpo.learning_rate),
        };
        if let Err(e) = grpo.validate() {
            errors.extend(e.into_iter().filter(|f| f.field != "g"));
        }

        let cfg = RunConfig {
            seed: file.seed.unwrap_or(d.seed),
            iterations: count("iterations", file.iterations, d.iterations, 0, &mut errors),
            batch: count("batch", file.batch, d.batch, 1, &mut errors),
            max_turns: count("max_turns", file.max_turns, d.max_turns, 1, &mut errors),
            reward,
            grpo,
            env: d.env,
        };
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_file(&ConfigFile::load(path)?)
    }

    pub fn registry(&self) -> ToolRegistry {
        self.env.registry()
    }

    /// Non-fatal findings about the effective configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let reachable = self.reward.diversity_reachable(&self.registry());
        if self.reward.eta > reachable + 1e-12 {
            out.push(format!(
                "eta = {} exceeds beta*kappa*|T| = {reachable}; the diversity cap is unreachable",
                self.reward.eta
            ));
        }
        if let Some(n) = self.reward.n_norm {
            let computed = self.reward.computed_n_norm();
            if (n - computed).abs() > 1e-12 {
                out.push(format!(
                    "n_norm override {n} differs from the computed maximum {computed}"
                ));
            }
        }
        out
    }

    /// Effective configuration as a flat document using the file keys.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            lambda1: Some(self.reward.lambda1),
            lambda2: Some(self.reward.lambda2),
            lambda3: Some(self.reward.lambda3),
            lambda4: Some(self.reward.lambda4),
            c1: Some(self.reward.c1),
            c2: Some(self.reward.c2),
            alpha: Some(self.reward.structure.alpha),
            gamma: Some(self.reward.structure.gamma),
            beta: Some(self.reward.beta),
            kappa: Some(i64::from(self.reward.kappa)),
            eta: Some(self.reward.eta),
            s: Some(self.reward.s),
            n_norm: Some(self.reward.effective_n_norm()),
            seed: Some(self.seed),
            iterations: Some(self.iterations as i64),
            batch: Some(self.batch as i64),
            g: Some(self.grpo.group_size as i64),
            max_turns: Some(self.max_turns as i64),
            learning_rate: Some(self.grpo.learning_rate),
            eps_low: Some(self.grpo.eps_low),
            eps_high: Some(self.grpo.eps_high),
            psi: Some(self.grpo.psi),
            delta: Some(self.grpo.delta),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("flat config always serializes")
    }
}
