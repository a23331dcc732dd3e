// SPDX-License-Identifier: MIT OR Apache-2.0

//! Channel fingerprints and their clustering.
//!
//! Each channel's training target is reduced to four central moments;
//! K-means groups the resulting vectors, the elbow heuristic picks k and a
//! two-component PCA gives plot coordinates. Vectors are clustered raw,
//! without standardization.

mod elbow;
mod kmeans;
mod moments;
mod pca;

pub use elbow::{elbow_select, knee, ElbowCurve};
pub use kmeans::{
    assign_cluster, kmeans_fit, kmeans_points, lloyd, nearest, squared_distance, ClusterModel, KMeansConfig, LloydRun,
    Point,
};
pub use moments::{compute_signature, ChannelSignature};
pub use pca::{orient, pca_project, symmetric_eigen, Projection2D};

use crate::error::Result;
use crate::ingest::TelemetryChannel;

/// Signature of a channel's training-split target column.
pub fn channel_signature(channel: &TelemetryChannel) -> Result<ChannelSignature> {
    let target: Vec<f64> = channel.train_target().to_vec();
    compute_signature(&target)
}

/// Signatures for every channel, in input order.
pub fn signature_table(channels: &[TelemetryChannel]) -> Result<Vec<(String, ChannelSignature)>> {
    channels
        .iter()
        .map(|c| channel_signature(c).map(|s| (c.id.clone(), s)))
        .collect()
}

/// Fraction of points whose cluster's majority label matches their own label.
pub fn purity<L: Ord + Clone>(assignments: &[usize], labels: &[L]) -> f64 {
    use std::collections::BTreeMap;
    if assignments.is_empty() {
        return 1.0;
    }
    let mut counts: BTreeMap<usize, BTreeMap<L, usize>> = BTreeMap::new();
    for (&a, l) in assignments.iter().zip(labels) {
        *counts.entry(a).or_default().entry(l.clone()).or_default() += 1;
    }
    let majority: usize = counts.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    majority as f64 / assignments.len() as f64
}
