// SPDX-License-Identifier: MIT OR Apache-2.0

//! Forecast-error anomaly detection.
//!
//! Absolute forecast errors are smoothed with an EWMA, a threshold
//! `epsilon = mean + z * std` is chosen without labels from a grid of `z`,
//! runs above the threshold become candidate sequences, and sequences whose
//! peaks do not stand out from the next-largest peak are pruned.

mod threshold;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{predict_channel, TrainedForecaster};
use crate::ingest::{AnomalyInterval, TelemetryChannel};

pub use threshold::{prune_sequences, runs_above, select_threshold, ScoreRow, ThresholdResult, MIN_SERIES_LEN};

/// Longest default EWMA span.
pub const MAX_SPAN: usize = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Candidate multipliers, scanned in the given order.
    pub z_candidates: Vec<f64>,
    /// EWMA span; `None` means `min(T / 2, 120)`.
    pub span: Option<usize>,
    /// Minimum relative drop between consecutive sorted peaks for a sequence to survive.
    pub prune_p: f64,
    /// Indices on each side of a sequence left out of the background peak used in pruning.
    pub prune_buffer: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            z_candidates: default_z_candidates(),
            span: None,
            prune_p: 0.13,
            prune_buffer: 100,
        }
    }
}

/// `2.0, 2.5, ..., 10.0`.
pub fn default_z_candidates() -> Vec<f64> {
    (0..=16).map(|i| 2.0 + 0.5 * i as f64).collect()
}

/// Span used for a series of length `len`: `min(len / 2, 120)`, at least 1.
pub fn default_span(len: usize) -> usize {
    (len / 2).clamp(1, MAX_SPAN)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// Test index of `raw[0]`.
    pub offset: usize,
}

/// A detected interval in test-index space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedAnomaly {
    pub start: usize,
    pub end: usize,
    /// Largest smoothed error inside the interval.
    pub peak_error: f64,
    pub epsilon: f64,
    pub z: f64,
}

impl DetectedAnomaly {
    pub fn interval(&self) -> AnomalyInterval {
        AnomalyInterval::new(self.start, self.end)
    }
}

/// Elementwise `|prediction - actual|`.
pub fn compute_errors(predictions: &[f64], actual: &[f64]) -> Result<Vec<f64>> {
    if predictions.len() != actual.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} actual values",
            predictions.len(),
            actual.len()
        )));
    }
    Ok(predictions.iter().zip(actual).map(|(p, a)| (p - a).abs()).collect())
}

/// EWMA with `alpha = 2 / (span + 1)`, started at `raw[0]`. A span of 0 is treated as 1.
pub fn smooth_errors(raw: &[f64], span: usize) -> Vec<f64> {
    let alpha = 2.0 / (span.max(1) as f64 + 1.0);
    let mut out = Vec::with_capacity(raw.len());
    let mut level = match raw.first() {
        Some(&v) => v,
        None => return out,
    };
    for &v in raw {
        level = alpha * v + (1.0 - alpha) * level;
        out.push(level);
    }
    out
}

/// Full detection outcome for one error series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub errors: ErrorSeries,
    pub threshold: ThresholdResult,
    pub anomalies: Vec<DetectedAnomaly>,
}

/// Smooths, thresholds and prunes `raw` errors whose first entry sits at test index `offset`.
pub fn detect_errors(raw: Vec<f64>, offset: usize, config: &DetectorConfig) -> Result<Detection> {
    if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("errors must be finite and non-negative"));
    }
    let span = config.span.unwrap_or_else(|| default_span(raw.len()));
    let smoothed = smooth_errors(&raw, span);
    let threshold = select_threshold(&smoothed, &config.z_candidates)?;
    let kept = prune_sequences(&threshold.sequences, &smoothed, config.prune_p, config.prune_buffer);
    let anomalies = kept
        .iter()
        .map(|iv| DetectedAnomaly {
            start: iv.start + offset,
            end: iv.end + offset,
            peak_error: smoothed[iv.start..=iv.end].iter().copied().fold(f64::MIN, f64::max),
            epsilon: threshold.epsilon,
            z: threshold.z,
        })
        .collect();
    Ok(Detection {
        errors: ErrorSeries { raw, smoothed, offset },
        threshold,
        anomalies,
    })
}

/// Predicts the channel's test split and runs detection on the errors.
pub fn detect_channel(
    forecaster: &TrainedForecaster,
    channel: &TelemetryChannel,
    config: &DetectorConfig,
) -> Result<Detection> {
    let predictions = predict_channel(forecaster, channel)?;
    let w = forecaster.spec.window;
    let actual: Vec<f64> = channel.test_target().iter().skip(w).copied().collect();
    let raw = compute_errors(&predictions, &actual)?;
    detect_errors(raw, w, config)
}
