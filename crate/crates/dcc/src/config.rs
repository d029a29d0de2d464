//! Search configuration files (TOML, or JSON by extension).
//!
//! The top level holds the [`SearchConfig`] fields. Optional tables
//! `endpoint`, `sandbox` and `checkpoint` and the key `graph_dir` configure
//! the surrounding workers.

use std::path::{Path, PathBuf};

use anyhow::Context;
use dcc_core::SearchConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::llm::EndpointConfig;
use crate::sandbox::SandboxCommand;

fn default_every() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointConfig {
    pub path: PathBuf,
    #[serde(default = "default_every")]
    pub every: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub search: SearchConfig,
    pub endpoint: Option<EndpointConfig>,
    pub sandbox: Option<SandboxCommand>,
    pub checkpoint: Option<CheckpointConfig>,
    pub graph_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str, json: bool) -> anyhow::Result<Self> {
        let value: Value = if json { serde_json::from_str(text)? } else { toml::from_str(text)? };
        let Value::Object(mut map) = value else {
            anyhow::bail!("configuration must be a table");
        };
        let mut take = |key: &str| map.remove(key);
        let endpoint = take("endpoint").map(serde_json::from_value).transpose().context("endpoint")?;
        let sandbox = take("sandbox").map(serde_json::from_value).transpose().context("sandbox")?;
        let checkpoint = take("checkpoint").map(serde_json::from_value).transpose().context("checkpoint")?;
        let graph_dir = take("graph_dir").map(serde_json::from_value).transpose().context("graph_dir")?;
        let search: SearchConfig = serde_json::from_value(Value::Object(map))?;
        search.validate()?;
        Ok(Self { search, endpoint, sandbox, checkpoint, graph_dir })
    }
}
