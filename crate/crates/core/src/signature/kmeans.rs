// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lloyd's K-means over signature vectors with k-means++ seeding and
//! best-of-restarts selection.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

use super::ChannelSignature;

pub type Point = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Point>,
    pub assignments: BTreeMap<String, usize>,
    /// Sum of squared Euclidean distances to the nearest centroid.
    pub distortion: f64,
    pub seed: u64,
}

impl ClusterModel {
    /// Channel ids grouped by cluster index.
    pub fn members(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.k];
        for (id, &c) in &self.assignments {
            out[c].push(id.as_str());
        }
        out
    }
}

pub fn squared_distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
pub fn nearest(centroids: &[Point], p: &Point) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn assign_cluster(model: &ClusterModel, signature: &ChannelSignature) -> usize {
    nearest(&model.centroids, &signature.to_array()).0
}

fn distinct_count(points: &[Point]) -> usize {
    let mut keys: Vec<[u64; 4]> = points.iter().map(|p| p.map(f64::to_bits)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Result of one Lloyd run over raw points.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub centroids: Vec<Point>,
    pub labels: Vec<usize>,
    pub distortion: f64,
    /// Distortion after each assignment step.
    pub trace: Vec<f64>,
}

fn plus_plus_init<R: Rng>(points: &[Point], k: usize, rng: &mut R) -> Vec<Point> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(i);
                    if r < w {
                        break;
                    }
                    r -= w;
                }
            }
            chosen.expect("positive total weight")
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[Point], centroids: &[Point], labels: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (label, p) in labels.iter_mut().zip(points) {
        let (i, d) = nearest(centroids, p);
        *label = i;
        total += d;
    }
    total
}

/// One Lloyd run from k-means++ seeds. Always finishes with an assignment
/// step, so labels are nearest-centroid with respect to the returned centroids.
pub fn lloyd(points: &[Point], k: usize, run_seed: u64, config: &KMeansConfig) -> LloydRun {
    let mut rng = seed::rng(run_seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut labels = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    let mut distortion = assign(points, &centroids, &mut labels);
    trace.push(distortion);

    for _ in 0..config.max_iter {
        let mut sums = vec![[0.0; 4]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for j in 0..4 {
                sums[l][j] += p[j];
            }
        }
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                next[c] = sums[c].map(|s| s / counts[c] as f64);
            }
        }
        // an emptied cluster takes the point farthest from its centroid
        for c in 0..k {
            if counts[c] == 0 {
                let far = points
                    .iter()
                    .zip(&labels)
                    .enumerate()
                    .map(|(i, (p, &l))| (i, squared_distance(p, &next[l])))
                    .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a })
                    .0;
                next[c] = points[far];
                counts[c] = 1;
            }
        }
        let shift: f64 = centroids.iter().zip(&next).map(|(a, b)| squared_distance(a, b)).sum();
        centroids = next;

        let previous = labels.clone();
        distortion = assign(points, &centroids, &mut labels);
        trace.push(distortion);
        if labels == previous || shift <= config.tol {
            break;
        }
    }
    LloydRun {
        centroids,
        labels,
        distortion,
        trace,
    }
}

/// Best-of-restarts K-means over raw points. Restart `r` uses
/// `seed::derive_index(seed, r)`; ties in distortion keep the earlier restart.
pub fn kmeans_points(points: &[Point], k: usize, seed: u64, config: &KMeansConfig) -> Result<LloydRun> {
    if points.is_empty() {
        return Err(Error::invalid("k-means needs at least one point"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of distinct points ({distinct})"
        )));
    }
    let mut best: Option<LloydRun> = None;
    for r in 0..config.restarts.max(1) {
        let run = lloyd(points, k, seed::derive_index(seed, r as u64), config);
        if best.as_ref().is_none_or(|b| run.distortion < b.distortion) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans_fit(
    signatures: &[(String, ChannelSignature)],
    k: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<ClusterModel> {
    let points: Vec<Point> = signatures.iter().map(|(_, s)| s.to_array()).collect();
    let run = kmeans_points(&points, k, seed, config)?;
    let mut assignments = BTreeMap::new();
    for ((id, _), &label) in signatures.iter().zip(&run.labels) {
        if assignments.insert(id.clone(), label).is_some() {
            return Err(Error::invalid(format!("duplicate channel id {id}")));
        }
    }
    Ok(ClusterModel {
        k,
        centroids: run.centroids,
        assignments,
        distortion: run.distortion,
        seed,
    })
}
