// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration, one TOML section per module.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detection::{DetectionConfig, ShelvingConfig};
use crate::error::{Error, Result};
use crate::pumpsim::PulseParams;
use crate::stats::BurstModel;

/// Commented example shipped with the crate; parses to the defaults.
pub const EXAMPLE_CONFIG_TOML: &str = include_str!("../config/example.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Maop,
    Nbop,
    Polarization,
}

impl std::str::FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "maop" => Ok(ProtocolKind::Maop),
            "nbop" => Ok(ProtocolKind::Nbop),
            "polarization" => Ok(ProtocolKind::Polarization),
            other => Err(Error::invalid(
                "protocol.kind",
                format!("`{other}` is not one of maop, nbop, polarization"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub species: String,
    /// Trials per prepared state.
    pub trials: u64,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            species: "137Ba+".into(),
            trials: 1_000_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    pub cycles: u32,
    /// NBOP only: the flush pulse runs in the first `flush_cycles` cycles.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flush_cycles: Option<u32>,
    /// When set, the flush leak is fitted so the final preparation error
    /// equals this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_prep_error: Option<f64>,
    pub pulses: PulseParams,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            kind: ProtocolKind::Nbop,
            cycles: 35,
            flush_cycles: Some(30),
            target_prep_error: Some(9.1e-5),
            pulses: PulseParams::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub archive: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub protocol: ProtocolSection,
    pub detection: DetectionConfig,
    pub shelving: ShelvingConfig,
    pub burst: BurstModel,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::format("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::format(path.display().to_string(), e))?;
        RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Format { context, message } => Error::Format {
                context: format!("{}: {context}", path.display()),
                message,
            },
            other => other,
        })
    }

    /// Resolved configuration; reloading it yields an equal value.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format("config", e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.trials == 0 {
            return Err(Error::invalid("run.trials", "must be at least 1"));
        }
        if self.run.species.trim().is_empty() {
            return Err(Error::invalid("run.species", "must name a species"));
        }
        if let (Some(f), ProtocolKind::Nbop) = (self.protocol.flush_cycles, self.protocol.kind) {
            if f > self.protocol.cycles {
                return Err(Error::invalid("protocol.flush_cycles", "exceeds protocol.cycles"));
            }
        }
        if let Some(t) = self.protocol.target_prep_error {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid("protocol.target_prep_error", "must lie in (0, 1)"));
            }
        }
        self.protocol.pulses.validate()?;
        self.detection.validate()?;
        self.shelving.validate()?;
        self.burst.validate(&self.detection)?;
        Ok(())
    }
}
