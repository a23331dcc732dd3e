// SPDX-License-Identifier: MIT OR Apache-2.0

//! `synth`: writes a synthetic dataset with planted level shifts.

use std::path::Path;

use anyhow::Context;
use rand::Rng;
use rayon::prelude::*;

use tal_core::ingest::{
    synthesize_channel, write_dataset, AnomalyInterval, AnomalyKind, BehaviorKind, PlantedAnomaly, TelemetryChannel,
    LABEL_FILE, TEST_DIR, TRAIN_DIR,
};
use tal_core::seed;

use crate::config::{RunConfig, SynthConfig};
use crate::outcome::usage;
use crate::pipeline::{pool, write_csv};

pub const KINDS_FILE: &str = "kinds.csv";

/// Leading share of the test split kept free of planted anomalies, so the
/// forecaster's first window sees nominal data.
const CLEAN_LEAD: f64 = 0.2;

/// Non-overlapping intervals, one per equal segment of the test split after the clean lead.
pub fn plan_anomalies(s: &SynthConfig, channel_seed: u64) -> anyhow::Result<Vec<PlantedAnomaly>> {
    if s.anomalies == 0 {
        return Ok(Vec::new());
    }
    let lead = (s.test_len as f64 * CLEAN_LEAD).ceil() as usize;
    let segment = (s.test_len - lead) / s.anomalies;
    if segment < 2 * s.min_anomaly_len {
        return Err(usage(format!(
            "{} anomalies of length >= {} do not fit in a test split of {}",
            s.anomalies, s.min_anomaly_len, s.test_len
        )));
    }
    let mut rng = seed::rng(channel_seed);
    Ok((0..s.anomalies)
        .map(|j| {
            let len = rng.random_range(s.min_anomaly_len..=s.max_anomaly_len.min(segment / 2));
            let lo = lead + j * segment;
            let start = rng.random_range(lo..=lo + segment - len);
            let kind = if rng.random_bool(0.5) {
                AnomalyKind::Point
            } else {
                AnomalyKind::Contextual
            };
            PlantedAnomaly {
                interval: AnomalyInterval {
                    start,
                    end: start + len - 1,
                    kind,
                },
                magnitude: s.magnitude,
            }
        })
        .collect())
}

fn is_empty_dir(dir: &Path) -> anyhow::Result<bool> {
    if !dir.exists() {
        return Ok(true);
    }
    let mut entries = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    Ok(entries.next().is_none())
}

/// Removes only what a previous `synth` run writes.
fn clear_previous(dir: &Path) -> anyhow::Result<()> {
    for sub in [TRAIN_DIR, TEST_DIR] {
        let p = dir.join(sub);
        if p.is_dir() {
            std::fs::remove_dir_all(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    for file in [LABEL_FILE, KINDS_FILE] {
        let p = dir.join(file);
        if p.is_file() {
            std::fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    Ok(())
}

pub fn run(config: &RunConfig, force: bool) -> anyhow::Result<usize> {
    let s = &config.synth;
    let root = &config.dataset;
    if !force && !is_empty_dir(root)? {
        return Err(usage(format!(
            "{} is not empty; pass --force to overwrite",
            root.display()
        )));
    }
    if s.kinds.is_empty() || s.per_kind == 0 {
        return Err(usage("nothing to synthesize: no kinds or per_kind is 0"));
    }
    let jobs: Vec<(BehaviorKind, String)> = s
        .kinds
        .iter()
        .flat_map(|&kind| (0..s.per_kind).map(move |j| (kind, format!("{kind}-{j:03}"))))
        .collect();
    let channels: Vec<TelemetryChannel> = pool(config.parallel)?.install(|| {
        jobs.par_iter()
            .map(|(kind, id)| {
                let planted = plan_anomalies(s, seed::derive(config.seed, &format!("synth/{id}/labels")))?;
                let channel_seed = seed::derive(config.seed, &format!("synth/{id}"));
                let mut c = synthesize_channel(*kind, s.train_len, s.test_len, s.context, &planted, channel_seed)
                    .map_err(|e| usage(e.to_string()))?;
                c.id = id.clone();
                Ok(c)
            })
            .collect::<anyhow::Result<_>>()
    })?;
    if force {
        clear_previous(root)?;
    }
    write_dataset(root, &channels, s.format)?;
    let rows: Vec<(String, String)> = jobs.iter().map(|(k, id)| (id.clone(), k.to_string())).collect();
    write_csv(&root.join(KINDS_FILE), &["channel", "kind"], rows)?;
    Ok(channels.len())
}
