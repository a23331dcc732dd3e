// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-architecture and per-cluster totals and ensemble routing. Totals are
//! summed confusions with F1 recomputed from the sums, never averaged F1s.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{f1, f1_per_second, ChannelResult, Confusion};

/// Table-III-shaped totals for one architecture over all channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSummary {
    pub architecture: String,
    pub channels: usize,
    pub total_seconds: f64,
    pub avg_seconds_per_channel: f64,
    pub anomaly: Confusion,
    pub point: Confusion,
    pub f1_anomaly: Option<f64>,
    pub f1_point: Option<f64>,
    /// `None` when F1 is undefined or no training time was spent.
    pub f1_per_second: Option<f64>,
}

/// Totals per architecture, ordered by F1 anomaly descending (undefined
/// last, ties by architecture id).
pub fn summarize_architectures(results: &[ChannelResult]) -> Vec<ArchitectureSummary> {
    let mut groups: BTreeMap<&str, Vec<&ChannelResult>> = BTreeMap::new();
    for r in results {
        groups.entry(&r.architecture).or_default().push(r);
    }
    let mut out: Vec<ArchitectureSummary> = groups
        .into_iter()
        .map(|(arch, rs)| {
            let anomaly: Confusion = rs.iter().map(|r| r.anomaly).sum();
            let point: Confusion = rs.iter().map(|r| r.point).sum();
            let total_seconds: f64 = rs.iter().map(|r| r.training_seconds).sum();
            let f1_anomaly = f1(anomaly);
            ArchitectureSummary {
                architecture: arch.to_string(),
                channels: rs.len(),
                total_seconds,
                avg_seconds_per_channel: total_seconds / rs.len() as f64,
                anomaly,
                point,
                f1_anomaly,
                f1_point: f1(point),
                f1_per_second: f1_anomaly.and_then(|f| f1_per_second(f, total_seconds).ok()),
            }
        })
        .collect();
    out.sort_by(|a, b| rank_order((a.f1_anomaly, &a.architecture), (b.f1_anomaly, &b.architecture)));
    out
}

/// Descending F1 with undefined values last; ties by ascending id.
fn rank_order(a: (Option<f64>, &str), b: (Option<f64>, &str)) -> Ordering {
    let key = |f: Option<f64>| f.unwrap_or(f64::NEG_INFINITY);
    key(b.0).total_cmp(&key(a.0)).then_with(|| a.1.cmp(b.1))
}

/// Summed scores of one architecture over one cluster's channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub architecture: String,
    pub cluster: usize,
    pub channels: usize,
    pub anomaly: Confusion,
    pub point: Confusion,
    pub f1_anomaly: Option<f64>,
    pub f1_point: Option<f64>,
    pub training_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Grouped by cluster, each group in ranking order.
    pub entries: Vec<ClusterEntry>,
    /// Architecture ids per cluster, best first.
    pub rankings: BTreeMap<usize, Vec<String>>,
}

impl ClusterReport {
    /// Builds a report from entries, ranking each cluster by F1 anomaly.
    pub fn from_entries(mut entries: Vec<ClusterEntry>) -> Self {
        entries.sort_by(|a, b| {
            a.cluster
                .cmp(&b.cluster)
                .then_with(|| rank_order((a.f1_anomaly, &a.architecture), (b.f1_anomaly, &b.architecture)))
        });
        let mut rankings: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for e in &entries {
            rankings.entry(e.cluster).or_default().push(e.architecture.clone());
        }
        ClusterReport { entries, rankings }
    }
}

/// Sums results per (architecture, cluster). Clusters without members do
/// not appear.
pub fn aggregate_cluster(results: &[ChannelResult], assignments: &BTreeMap<String, usize>) -> Result<ClusterReport> {
    let mut sums: BTreeMap<(usize, &str), ClusterEntry> = BTreeMap::new();
    for r in results {
        let &cluster = assignments
            .get(&r.channel)
            .ok_or_else(|| Error::invalid(format!("channel {} has no cluster assignment", r.channel)))?;
        let e = sums.entry((cluster, &r.architecture)).or_insert_with(|| ClusterEntry {
            architecture: r.architecture.clone(),
            cluster,
            channels: 0,
            anomaly: Confusion::default(),
            point: Confusion::default(),
            f1_anomaly: None,
            f1_point: None,
            training_seconds: 0.0,
        });
        e.channels += 1;
        e.anomaly += r.anomaly;
        e.point += r.point;
        e.training_seconds += r.training_seconds;
    }
    let entries = sums
        .into_values()
        .map(|mut e| {
            e.f1_anomaly = f1(e.anomaly);
            e.f1_point = f1(e.point);
            e
        })
        .collect();
    Ok(ClusterReport::from_entries(entries))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleChoice {
    pub cluster: usize,
    pub architecture: String,
    pub f1_anomaly: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSelection {
    pub choices: Vec<EnsembleChoice>,
    /// Unweighted mean of the winners' F1 over clusters where it is defined.
    pub mean_f1: f64,
}

/// Routes each cluster to its top-ranked architecture (highest F1 anomaly,
/// ties to the lexicographically smaller id).
pub fn select_ensemble(report: &ClusterReport) -> Result<EnsembleSelection> {
    let mut best: BTreeMap<usize, &ClusterEntry> = BTreeMap::new();
    for e in &report.entries {
        best.entry(e.cluster)
            .and_modify(|b| {
                if rank_order((e.f1_anomaly, &e.architecture), (b.f1_anomaly, &b.architecture)) == Ordering::Less {
                    *b = e;
                }
            })
            .or_insert(e);
    }
    if best.is_empty() {
        return Err(Error::invalid("cluster report is empty"));
    }
    let choices: Vec<EnsembleChoice> = best
        .into_values()
        .map(|e| EnsembleChoice {
            cluster: e.cluster,
            architecture: e.architecture.clone(),
            f1_anomaly: e.f1_anomaly,
        })
        .collect();
    let scored: Vec<f64> = choices.iter().filter_map(|c| c.f1_anomaly).collect();
    if scored.is_empty() {
        return Err(Error::invalid("no cluster has a defined F1"));
    }
    let mean_f1 = scored.iter().sum::<f64>() / scored.len() as f64;
    Ok(EnsembleSelection { choices, mean_f1 })
}
