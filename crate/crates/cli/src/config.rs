//! Run configuration: a TOML file whose tables mirror the core configuration types,
//! overridden by command-line flags.

use crate::error::{CliError, CliResult};
use rift_core::metrics::MetricsConfig;
use rift_core::reward::Style;
use rift_core::sim::SimConfig;
use rift_core::trainer::{Objective, TrainConfig};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Scenario file; the built-in four-way intersection when unset.
    pub scenario: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Episodes written by `simulate`.
    pub episodes: usize,
    pub train: TrainConfig,
    pub sim: SimConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenario: None,
            checkpoint: None,
            episodes: 4,
            train: TrainConfig::default(),
            sim: SimConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

/// Values given on the command line; each one replaces its config counterpart.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scenario: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub objective: Option<Objective>,
    pub style: Option<Style>,
    pub episodes: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads `path` and resolves relative file references against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| CliError::input(path, rift_core::Error::Parse(e.message().to_string())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.scenario, &mut cfg.checkpoint]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn resolve(config: Option<&Path>, ov: Overrides) -> CliResult<Self> {
        let mut cfg = match config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if ov.scenario.is_some() {
            cfg.scenario = ov.scenario;
        }
        if ov.checkpoint.is_some() {
            cfg.checkpoint = ov.checkpoint;
        }
        if let Some(o) = ov.objective {
            cfg.train.objective = o;
        }
        if ov.style.is_some() {
            cfg.train.style = ov.style;
        }
        if let Some(n) = ov.episodes {
            cfg.episodes = n;
        }
        cfg.train.apply(&mut cfg.sim);
        cfg.train.validate()?;
        cfg.sim.validate()?;
        cfg.metrics.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_and_overrides() {
        let cfg = RunConfig::from_toml(
            r#"
            seed = 5
            episodes = 2
            [train]
            buffer_capacity = 64
            objective = "grpo"
            style = "aggressive"
            [sim]
            cbv_delta = 20.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.train.buffer_capacity, 64);
        assert_eq!(cfg.train.objective, Objective::Grpo);
        assert_eq!(cfg.train.style, Some(Style::Aggressive));
        assert_eq!(cfg.sim.cbv_delta, 20.0);
        assert_eq!(cfg.train.batch_size, TrainConfig::default().batch_size);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("colour = 1").is_err());
        assert!(RunConfig::from_toml("[train]\nbufer_capacity = 1").is_err());
    }

    #[test]
    fn custom_reward_weights() {
        let cfg = RunConfig::from_toml(
            r#"
            [train.reward_weights]
            collision = 1.0
            boundary = 1.0
            comfort = 0.0
            lane_align = 0.5
            vel_align = 0.0
            lane_center = 0.5
            center_bias = 0.0
            velocity = 1.0
            timestep = 0.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.train.reward_for(Style::Normal).weights.velocity, 1.0);
    }
}
