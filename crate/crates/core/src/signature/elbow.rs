// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::kmeans::{kmeans_points, KMeansConfig, Point};
use super::ChannelSignature;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowCurve {
    /// `(k, distortion)` for each k in the scanned range.
    pub entries: Vec<(usize, f64)>,
    pub chosen_k: usize,
}

/// Picks the knee of a distortion curve: the interior k with the largest
/// discrete second difference `D(k-1) - 2 D(k) + D(k+1)`. Ties, including a
/// curve with no knee at all, resolve to the smallest interior k.
pub fn knee(entries: &[(usize, f64)]) -> Result<usize> {
    if entries.len() < 3 {
        return Err(Error::invalid(format!(
            "elbow needs at least 3 k values, got {}",
            entries.len()
        )));
    }
    let mut best = (entries[1].0, f64::NEG_INFINITY);
    for w in entries.windows(3) {
        let second = w[0].1 - 2.0 * w[1].1 + w[2].1;
        if second > best.1 {
            best = (w[1].0, second);
        }
    }
    Ok(best.0)
}

pub fn elbow_select(
    signatures: &[ChannelSignature],
    k_min: usize,
    k_max: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<ElbowCurve> {
    if k_min == 0 || k_max < k_min || k_max - k_min < 2 {
        return Err(Error::invalid(format!(
            "elbow needs at least 3 k values, got range {k_min}..={k_max}"
        )));
    }
    let points: Vec<Point> = signatures.iter().map(|s| s.to_array()).collect();
    let entries = (k_min..=k_max)
        .map(|k| kmeans_points(&points, k, seed, config).map(|run| (k, run.distortion)))
        .collect::<Result<Vec<_>>>()?;
    let chosen_k = knee(&entries)?;
    Ok(ElbowCurve { entries, chosen_k })
}
