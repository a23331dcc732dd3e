// SPDX-License-Identifier: MIT OR Apache-2.0

//! `evaluate` and `report`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use tal_core::evaluate::{
    aggregate_cluster, evaluate_channel, select_ensemble, summarize_architectures, ArchitectureSummary, ChannelResult,
    ClusterReport, EnsembleSelection,
};
use tal_core::ingest::{AnomalyInterval, LABEL_FILE};

use crate::config::{Architecture, RunConfig};
use crate::ledger::RunLedger;
use crate::pipeline::{
    detection_path, load, read_assignments, read_csv, read_json, write_csv, write_json, ClusterOutcome, DetectionRow,
    CLUSTER_FILE,
};

pub const EVALUATION_FILE: &str = "evaluation.json";
pub const REPORT_FILE: &str = "report.md";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub channels: usize,
    pub anomaly_sequences: usize,
    pub test_values: usize,
    pub results: Vec<ChannelResult>,
    pub architectures: Vec<ArchitectureSummary>,
    pub clusters: ClusterReport,
    pub ensemble: EnsembleSelection,
}

pub fn evaluate(config: &RunConfig, archs: &[Architecture], ledger: &RunLedger) -> anyhow::Result<Evaluation> {
    let label_path = config.dataset.join(LABEL_FILE);
    if !label_path.exists() {
        return Err(anyhow!("{} not found; evaluation needs labels", label_path.display()));
    }
    let (manifest, channels) = load(config)?;
    let out = &config.output;
    let assignments = read_assignments(out)?;

    let mut results = Vec::with_capacity(archs.len() * channels.len());
    for arch in archs {
        let timings = ledger.training_seconds.get(&arch.name);
        for channel in &channels {
            let path = detection_path(out, &arch.name, &channel.id);
            if !path.exists() {
                return Err(anyhow!("{} not found; run detect first", path.display()));
            }
            let predicted: Vec<AnomalyInterval> = read_csv::<DetectionRow>(&path)?
                .iter()
                .map(|r| AnomalyInterval::new(r.start, r.end))
                .collect();
            let seconds = timings.and_then(|t| t.get(&channel.id)).copied().unwrap_or(0.0);
            results.push(evaluate_channel(
                &channel.id,
                &arch.name,
                &predicted,
                &channel.labels,
                channel.test.nrows(),
                seconds,
            )?);
        }
    }
    let architectures = summarize_architectures(&results);
    let clusters = aggregate_cluster(&results, &assignments)?;
    let ensemble = select_ensemble(&clusters)?;

    write_csv(
        &out.join("results_by_architecture.csv"),
        &[
            "architecture",
            "channels",
            "total_seconds",
            "avg_seconds_per_channel",
            "f1_point",
            "tp",
            "fp",
            "fn",
            "f1_anomaly",
            "f1_per_second",
        ],
        architectures.iter().map(|s| {
            (
                &s.architecture,
                s.channels,
                s.total_seconds,
                s.avg_seconds_per_channel,
                s.f1_point,
                s.anomaly.tp,
                s.anomaly.fp,
                s.anomaly.fn_,
                s.f1_anomaly,
                s.f1_per_second,
            )
        }),
    )?;
    write_csv(
        &out.join("results_by_cluster.csv"),
        &[
            "cluster",
            "rank",
            "architecture",
            "channels",
            "tp",
            "fp",
            "fn",
            "f1_anomaly",
            "f1_point",
        ],
        clusters.entries.iter().map(|e| {
            let rank = clusters.rankings[&e.cluster]
                .iter()
                .position(|a| *a == e.architecture)
                .unwrap_or(0)
                + 1;
            (
                e.cluster,
                rank,
                &e.architecture,
                e.channels,
                e.anomaly.tp,
                e.anomaly.fp,
                e.anomaly.fn_,
                e.f1_anomaly,
                e.f1_point,
            )
        }),
    )?;
    write_json(&out.join("ensemble.json"), &ensemble)?;
    let evaluation = Evaluation {
        channels: channels.len(),
        anomaly_sequences: manifest.total_anomaly_sequences,
        test_values: manifest.total_test_values,
        results,
        architectures,
        clusters,
        ensemble,
    };
    write_json(&out.join(EVALUATION_FILE), &evaluation)?;
    Ok(evaluation)
}

fn pct(f: Option<f64>) -> String {
    f.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

/// Markdown summary of the outputs of `cluster` and `evaluate`.
pub fn render(cluster: &ClusterOutcome, eval: &Evaluation) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Anomaly detection report\n");
    let _ = writeln!(
        md,
        "{} channels, {} labeled anomaly sequences, {} test values.\n",
        eval.channels, eval.anomaly_sequences, eval.test_values
    );

    let _ = writeln!(md, "## Clustering\n");
    let m = &cluster.model;
    match &cluster.elbow {
        Some(e) => {
            let _ = writeln!(
                md,
                "k = {} (elbow choice {}), distortion {:.6}.\n",
                m.k, e.chosen_k, m.distortion
            );
            let _ = writeln!(md, "| k | distortion |\n|---:|---:|");
            for &(k, d) in &e.entries {
                let _ = writeln!(md, "| {k} | {d:.6} |");
            }
            md.push('\n');
        }
        None => {
            let _ = writeln!(md, "k = {} (fixed), distortion {:.6}.\n", m.k, m.distortion);
        }
    }
    let _ = writeln!(md, "| cluster | channels |\n|---:|---:|");
    for (i, members) in m.members().iter().enumerate() {
        let _ = writeln!(md, "| {i} | {} |", members.len());
    }
    if let Some(p) = &cluster.projection {
        let _ = writeln!(
            md,
            "\nFirst two principal components explain {:.1}% and {:.1}% of signature variance.",
            100.0 * p.explained_variance_ratio[0],
            100.0 * p.explained_variance_ratio[1]
        );
    }

    let _ = writeln!(md, "\n## Architectures\n");
    let _ = writeln!(
        md,
        "| architecture | total s | avg s/channel | F1 point | TP | FP | FN | F1 anomaly | F1/s |\n|---|---:|---:|---:|---:|---:|---:|---:|---:|"
    );
    for s in &eval.architectures {
        let _ = writeln!(
            md,
            "| {} | {:.2} | {:.3} | {} | {} | {} | {} | {} | {} |",
            s.architecture,
            s.total_seconds,
            s.avg_seconds_per_channel,
            pct(s.f1_point),
            s.anomaly.tp,
            s.anomaly.fp,
            s.anomaly.fn_,
            pct(s.f1_anomaly),
            s.f1_per_second.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}")),
        );
    }

    let _ = writeln!(md, "\n## Per cluster\n");
    let _ = writeln!(
        md,
        "| cluster | architecture | channels | TP | FP | FN | F1 anomaly |\n|---:|---|---:|---:|---:|---:|---:|"
    );
    for e in &eval.clusters.entries {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} |",
            e.cluster,
            e.architecture,
            e.channels,
            e.anomaly.tp,
            e.anomaly.fp,
            e.anomaly.fn_,
            pct(e.f1_anomaly)
        );
    }

    let _ = writeln!(md, "\n## Ensemble\n");
    let _ = writeln!(md, "| cluster | architecture | F1 anomaly |\n|---:|---|---:|");
    for c in &eval.ensemble.choices {
        let _ = writeln!(md, "| {} | {} | {} |", c.cluster, c.architecture, pct(c.f1_anomaly));
    }
    let _ = writeln!(md, "\nMean F1 over clusters: {:.2}", eval.ensemble.mean_f1);
    md
}

pub fn report(out: &Path) -> anyhow::Result<String> {
    let need = |name: &str, stage: &str| {
        let p = out.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(anyhow!("{} not found; run {stage} first", p.display()))
        }
    };
    let cluster: ClusterOutcome = read_json(&need(CLUSTER_FILE, "cluster")?)?;
    let eval: Evaluation = read_json(&need(EVALUATION_FILE, "evaluate")?)?;
    let md = render(&cluster, &eval);
    let path = out.join(REPORT_FILE);
    std::fs::write(&path, &md).with_context(|| format!("writing {}", path.display()))?;
    Ok(md)
}
