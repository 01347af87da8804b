//! Versioned experiment config shared by every subcommand.

use std::path::Path;

use ontime::ars::ArsConfig;
use ontime::harness::{BenchConfig, PipelineConfig, SimConfig, SuiteManifest};
use ontime::readiness::ReadinessTrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub version: u32,
    pub sim: SimConfig,
    pub pipeline: PipelineConfig,
    pub train: ReadinessTrainConfig<f64>,
    pub ars: ArsConfig<f64>,
    pub bench: BenchConfig,
}

impl Default for CliConfig {
    /// Settings of the bundled easy tier.
    fn default() -> Self {
        let manifest = SuiteManifest::bundled();
        let easy = manifest.tier("easy").expect("bundled easy tier");
        Self {
            version: CONFIG_VERSION,
            sim: easy.sim.clone(),
            pipeline: easy.pipeline.clone(),
            train: easy.train.clone(),
            ars: ArsConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            field: Some(e.path().to_string()),
            message: e.inner().to_string(),
        })?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config {
                field: Some("version".into()),
                message: format!(
                    "unsupported config version {}, expected {CONFIG_VERSION}",
                    cfg.version
                ),
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::parse(&crate::read_input(p)?),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let checks = [
            ("sim", self.sim.validate()),
            ("pipeline", self.pipeline.validate()),
            ("train", self.train.validate()),
            ("ars", self.ars.validate()),
            ("bench.memory", self.bench.memory.validate()),
        ];
        for (field, res) in checks {
            if let Err(e) = res {
                return Err(CliError::Config {
                    field: Some(field.into()),
                    message: e.to_string(),
                });
            }
        }
        Ok(())
    }
}
