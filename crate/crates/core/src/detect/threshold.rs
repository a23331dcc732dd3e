// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AnomalyInterval;

/// Shortest smoothed series accepted by [`select_threshold`].
pub const MIN_SERIES_LEN: usize = 10;

/// Diagnostics for one candidate `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub z: f64,
    pub epsilon: f64,
    /// Points strictly above `epsilon`.
    pub removed: usize,
    /// Contiguous runs of removed points.
    pub sequences: usize,
    /// `(dmean / mean + dstd / std) / (removed + sequences^2)`; 0 when nothing is removed.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub epsilon: f64,
    pub z: f64,
    /// Runs strictly above `epsilon`, in input index space, before pruning.
    pub sequences: Vec<AnomalyInterval>,
    pub score_table: Vec<ScoreRow>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Maximal runs of indices with `values[i] > epsilon`.
pub fn runs_above(values: &[f64], epsilon: f64) -> Vec<AnomalyInterval> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in values.iter().enumerate() {
        match (v > epsilon, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(AnomalyInterval::new(s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(AnomalyInterval::new(s, values.len() - 1));
    }
    runs
}

/// Scores every candidate `z` and keeps the best.
///
/// The highest score wins, ties going to the earlier candidate. When no
/// candidate lifts any point above its threshold the last candidate is
/// reported with no sequences. A series with zero spread has no threshold:
/// `epsilon` is its mean, `z` is 0 and no sequences are returned.
pub fn select_threshold(smoothed: &[f64], z_candidates: &[f64]) -> Result<ThresholdResult> {
    if smoothed.len() < MIN_SERIES_LEN {
        return Err(Error::invalid(format!(
            "threshold selection needs at least {MIN_SERIES_LEN} errors, got {}",
            smoothed.len()
        )));
    }
    if z_candidates.is_empty() {
        return Err(Error::invalid("no threshold multipliers given"));
    }
    let (mut mean, std) = mean_std(smoothed.iter().copied());
    let all_equal = smoothed.iter().all(|&v| v == smoothed[0]);
    if all_equal {
        mean = smoothed[0];
    }
    // spread below rounding noise of the mean counts as none
    if all_equal || std <= f64::EPSILON * mean.abs() {
        return Ok(ThresholdResult {
            epsilon: mean,
            z: 0.0,
            sequences: Vec::new(),
            score_table: Vec::new(),
        });
    }

    let mut table = Vec::with_capacity(z_candidates.len());
    let mut best: Option<usize> = None;
    for &z in z_candidates {
        let epsilon = mean + z * std;
        let runs = runs_above(smoothed, epsilon);
        let removed: usize = runs.iter().map(|r| r.len()).sum();
        let score = if removed == 0 {
            0.0
        } else {
            let (m, s) = mean_std(smoothed.iter().copied().filter(|&v| v <= epsilon));
            let gain = (mean - m) / mean + (std - s) / std;
            gain / (removed + runs.len() * runs.len()) as f64
        };
        table.push(ScoreRow {
            z,
            epsilon,
            removed,
            sequences: runs.len(),
            score,
        });
        let row = table.len() - 1;
        if removed > 0 && best.is_none_or(|b| score > table[b].score) {
            best = Some(row);
        }
    }
    let chosen = best.unwrap_or(table.len() - 1);
    let ScoreRow { z, epsilon, .. } = table[chosen];
    Ok(ThresholdResult {
        epsilon,
        z,
        sequences: runs_above(smoothed, epsilon),
        score_table: table,
    })
}

/// Drops sequences whose peaks do not stand out.
///
/// Peaks are sorted descending and followed by the background peak: the
/// largest smoothed value farther than `buffer` indices from every sequence
/// (0 if there is none). With `d_i = (m_{i-1} - m_i) / m_{i-1}`, the kept
/// sequences are the prefix of ranks up to the last `i` with `d_i > p`;
/// if no drop exceeds `p` nothing survives. Output is ordered by start.
pub fn prune_sequences(sequences: &[AnomalyInterval], smoothed: &[f64], p: f64, buffer: usize) -> Vec<AnomalyInterval> {
    if sequences.is_empty() {
        return Vec::new();
    }
    let peak = |iv: &AnomalyInterval| smoothed[iv.start..=iv.end].iter().copied().fold(f64::MIN, f64::max);
    let mut ranked: Vec<(f64, AnomalyInterval)> = sequences.iter().map(|iv| (peak(iv), *iv)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut inside = vec![false; smoothed.len()];
    for iv in sequences {
        let lo = iv.start.saturating_sub(buffer);
        let hi = (iv.end + buffer).min(smoothed.len() - 1);
        inside[lo..=hi].iter_mut().for_each(|f| *f = true);
    }
    let background = smoothed
        .iter()
        .zip(&inside)
        .filter(|(_, &f)| !f)
        .map(|(&v, _)| v)
        .fold(0.0, f64::max);

    let mut maxima: Vec<f64> = ranked.iter().map(|r| r.0).collect();
    maxima.push(background);
    let keep = (1..maxima.len())
        .rev()
        .find(|&i| maxima[i - 1] > 0.0 && (maxima[i - 1] - maxima[i]) / maxima[i - 1] > p)
        .unwrap_or(0);

    let mut kept: Vec<AnomalyInterval> = ranked[..keep].iter().map(|r| r.1).collect();
    kept.sort();
    kept
}
