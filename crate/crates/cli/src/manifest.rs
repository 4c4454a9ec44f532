use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::config::create_parent;

/// Everything needed to rerun a subcommand. Written next to its outputs;
/// contains no timestamps or host details so reruns are byte-identical.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub parameters: serde_json::Value,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, config: Option<&Path>) -> Self {
        RunManifest {
            tool: "driftscope",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config: config.map(|p| p.display().to_string()),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            parameters: serde_json::Value::Null,
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.into(), value);
        self
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.into(), path.display().to_string());
        self
    }

    pub fn output(mut self, name: &str, path: &Path) -> Self {
        self.outputs.insert(name.into(), path.display().to_string());
        self
    }

    pub fn parameters(mut self, value: impl Serialize) -> anyhow::Result<Self> {
        self.parameters = serde_json::to_value(value)?;
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        create_parent(path)?;
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
