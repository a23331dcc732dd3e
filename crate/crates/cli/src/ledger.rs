// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run ledger: the only output allowed to differ between identical runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};

pub const LEDGER_FILE: &str = "ledger.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLedger {
    pub tool_version: String,
    pub config_hash: String,
    pub stages: BTreeMap<String, StageTimes>,
    /// Wall-clock training seconds per architecture, then channel.
    pub training_seconds: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunLedger {
    /// Existing ledger in `dir`, or a fresh one.
    pub fn open(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(LEDGER_FILE);
        if !path.exists() {
            return Ok(RunLedger::default());
        }
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn record(&mut self, stage: &str, started: f64, config_hash: &str) {
        self.tool_version = env!("CARGO_PKG_VERSION").to_string();
        self.config_hash = config_hash.to_string();
        self.stages.insert(
            stage.to_string(),
            StageTimes {
                started,
                finished: now(),
            },
        );
    }

    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(LEDGER_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
