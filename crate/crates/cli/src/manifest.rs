//! Run manifest: the resolved configuration plus run bookkeeping.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Complete,
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub status: Status,
    pub seed: u64,
    pub wall_time_s: f64,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Keys filled from defaults, with a note on each.
    #[serde(default)]
    pub defaults: BTreeMap<String, String>,
    /// Scalar results worth reading without opening the CSVs.
    #[serde(default)]
    pub summary: BTreeMap<String, String>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn start(config: &RunConfig, defaults: &[(String, String)]) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            status: Status::Running,
            seed: config.seed,
            wall_time_s: 0.0,
            outputs: Vec::new(),
            error: None,
            defaults: defaults.iter().cloned().collect(),
            summary: BTreeMap::new(),
            config: config.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing manifest")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
