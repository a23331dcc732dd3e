// SPDX-License-Identifier: MIT OR Apache-2.0

//! `cluster`, `train` and `detect`, plus the file helpers every stage shares.
//! Workers handle whole channels; results are collected in input order so
//! outputs do not depend on the pool size.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tal_core::detect::{detect_channel, DetectedAnomaly};
use tal_core::forecast::{load_archive, save_archive, train, TrainedForecaster};
use tal_core::ingest::{load_dataset, DatasetManifest, TelemetryChannel};
use tal_core::seed;
use tal_core::signature::{
    channel_signature, elbow_select, kmeans_fit, pca_project, ChannelSignature, ClusterModel, ElbowCurve, Projection2D,
};

use crate::config::{Architecture, RunConfig};
use crate::ledger::RunLedger;

pub const MODELS_DIR: &str = "models";
pub const DETECTIONS_DIR: &str = "detections";
pub const CLUSTER_FILE: &str = "cluster.json";
pub const CLUSTERS_CSV: &str = "clusters.csv";

pub fn pool(threads: usize) -> anyhow::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")
}

pub fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Comma-separated, header row first.
pub fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_csv<R: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<R>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<R>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Loads the configured dataset; an empty one is an error.
pub fn load(config: &RunConfig) -> anyhow::Result<(DatasetManifest, Vec<TelemetryChannel>)> {
    let (manifest, channels) =
        load_dataset(&config.dataset).with_context(|| format!("loading dataset {}", config.dataset.display()))?;
    if channels.is_empty() {
        return Err(anyhow!("dataset {} has no channels", config.dataset.display()));
    }
    Ok((manifest, channels))
}

pub fn model_path(out: &Path, arch: &str, channel: &str) -> PathBuf {
    out.join(MODELS_DIR).join(arch).join(format!("{channel}.json"))
}

pub fn detection_path(out: &Path, arch: &str, channel: &str) -> PathBuf {
    out.join(DETECTIONS_DIR).join(arch).join(format!("{channel}.csv"))
}

/// Everything `cluster` decides, kept for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutcome {
    pub model: ClusterModel,
    /// Absent when the dataset is too small for a three-point curve.
    pub elbow: Option<ElbowCurve>,
    /// Absent when the signatures have no spread.
    pub projection: Option<Projection2D>,
}

fn distinct_points(sigs: &[(String, ChannelSignature)]) -> usize {
    sigs.iter()
        .map(|(_, s)| s.to_array().map(f64::to_bits))
        .collect::<BTreeSet<_>>()
        .len()
}

pub fn cluster(config: &RunConfig) -> anyhow::Result<ClusterOutcome> {
    let (_, channels) = load(config)?;
    let sigs: Vec<(String, ChannelSignature)> = pool(config.parallel)?.install(|| {
        channels
            .par_iter()
            .map(|c| channel_signature(c).map(|s| (c.id.clone(), s)))
            .collect::<Result<_, _>>()
    })?;
    let c = &config.clustering;
    let km = c.kmeans();
    let cluster_seed = seed::derive(config.seed, "cluster");

    let k_max = c.k_max.min(distinct_points(&sigs));
    let elbow = if k_max >= c.k_min + 2 {
        let points: Vec<ChannelSignature> = sigs.iter().map(|(_, s)| *s).collect();
        Some(elbow_select(&points, c.k_min, k_max, cluster_seed, &km)?)
    } else {
        log::warn!(
            "{} distinct signatures: too few for an elbow scan",
            distinct_points(&sigs)
        );
        None
    };
    let k = match (c.k, &elbow) {
        (Some(k), _) => k,
        (None, Some(e)) => e.chosen_k,
        (None, None) => return Err(anyhow!("too few distinct channels to choose k; set clustering.k")),
    };
    let model = kmeans_fit(&sigs, k, cluster_seed, &km)?;
    let projection = match pca_project(&sigs) {
        Ok(p) => Some(p),
        Err(e) => {
            log::warn!("skipping projection: {e}");
            None
        }
    };

    let out = &config.output;
    create_dir(out)?;
    write_csv(
        &out.join("signatures.csv"),
        &["channel", "mean", "std", "skewness", "kurtosis"],
        sigs.iter().map(|(id, s)| (id, s.mean, s.std, s.skewness, s.kurtosis)),
    )?;
    write_csv(&out.join(CLUSTERS_CSV), &["channel", "cluster"], &model.assignments)?;
    if let Some(e) = &elbow {
        write_csv(
            &out.join("elbow.csv"),
            &["k", "distortion", "chosen"],
            e.entries.iter().map(|&(k, d)| (k, d, k == e.chosen_k)),
        )?;
    }
    if let Some(p) = &projection {
        write_csv(
            &out.join("pca.csv"),
            &["channel", "cluster", "pc1", "pc2"],
            p.points.iter().map(|(id, &(x, y))| (id, model.assignments[id], x, y)),
        )?;
    }
    let outcome = ClusterOutcome {
        model,
        elbow,
        projection,
    };
    write_json(&out.join(CLUSTER_FILE), &outcome)?;
    Ok(outcome)
}

/// Reads `clusters.csv` written by [`cluster`].
pub fn read_assignments(out: &Path) -> anyhow::Result<BTreeMap<String, usize>> {
    let path = out.join(CLUSTERS_CSV);
    if !path.exists() {
        return Err(anyhow!("{} not found; run cluster first", path.display()));
    }
    Ok(read_csv::<(String, usize)>(&path)?.into_iter().collect())
}

/// Trains every architecture on every channel. Archives hold no wall-clock
/// time so reruns are byte-identical; timings go to the ledger.
pub fn train_all(config: &RunConfig, archs: &[Architecture], ledger: &mut RunLedger) -> anyhow::Result<usize> {
    let (_, channels) = load(config)?;
    let jobs: Vec<(&Architecture, &TelemetryChannel)> = archs
        .iter()
        .flat_map(|a| channels.iter().map(move |c| (a, c)))
        .collect();
    for a in archs {
        create_dir(&config.output.join(MODELS_DIR).join(&a.name))?;
    }
    let timings: Vec<f64> = pool(config.parallel)?.install(|| {
        jobs.par_iter()
            .map(|(arch, channel)| {
                let spec = arch.spec_for(config.seed, &channel.id);
                let trained =
                    train(&spec, channel).with_context(|| format!("training {} on {}", arch.name, channel.id))?;
                let seconds = trained.training_seconds;
                let archived = TrainedForecaster {
                    training_seconds: 0.0,
                    ..trained
                };
                save_archive(&model_path(&config.output, &arch.name, &channel.id), &archived)?;
                log::info!("trained {} on {} in {seconds:.3}s", arch.name, channel.id);
                Ok(seconds)
            })
            .collect::<anyhow::Result<_>>()
    })?;
    for ((arch, channel), seconds) in jobs.iter().zip(timings) {
        ledger
            .training_seconds
            .entry(arch.name.clone())
            .or_default()
            .insert(channel.id.clone(), seconds);
    }
    Ok(jobs.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub start: usize,
    pub end: usize,
    pub peak_error: f64,
    pub epsilon: f64,
    pub z: f64,
}

impl From<&DetectedAnomaly> for DetectionRow {
    fn from(a: &DetectedAnomaly) -> Self {
        DetectionRow {
            start: a.start,
            end: a.end,
            peak_error: a.peak_error,
            epsilon: a.epsilon,
            z: a.z,
        }
    }
}

pub const DETECTION_HEADER: [&str; 5] = ["start", "end", "peak_error", "epsilon", "z"];

/// Runs detection for every trained (architecture, channel) pair. Returns
/// the number of detected intervals.
pub fn detect_all(config: &RunConfig, archs: &[Architecture]) -> anyhow::Result<usize> {
    let (_, channels) = load(config)?;
    let out = &config.output;
    let jobs: Vec<(&Architecture, &TelemetryChannel)> = archs
        .iter()
        .flat_map(|a| channels.iter().map(move |c| (a, c)))
        .collect();
    for a in archs {
        create_dir(&out.join(DETECTIONS_DIR).join(&a.name))?;
    }
    let counts: Vec<usize> = pool(config.parallel)?.install(|| {
        jobs.par_iter()
            .map(|(arch, channel)| {
                let path = model_path(out, &arch.name, &channel.id);
                if !path.exists() {
                    return Err(anyhow!("no model at {}; run train first", path.display()));
                }
                let forecaster = load_archive(&path)?;
                let detection = detect_channel(&forecaster, channel, &config.detector)
                    .with_context(|| format!("detecting {} on {}", arch.name, channel.id))?;
                let rows: Vec<DetectionRow> = detection.anomalies.iter().map(DetectionRow::from).collect();
                write_csv(&detection_path(out, &arch.name, &channel.id), &DETECTION_HEADER, &rows)?;
                Ok(rows.len())
            })
            .collect::<anyhow::Result<_>>()
    })?;
    Ok(counts.iter().sum())
}
