// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scoring detections against labels.
//!
//! Anomaly-level counts use the overlap rule: a label is found if any
//! predicted interval shares at least one index with it, and a prediction is
//! a false positive only if it touches no label. Point-level counts compare
//! index sets. F1 values are percentages.

mod aggregate;

use std::collections::BTreeSet;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AnomalyInterval;

pub use aggregate::{
    aggregate_cluster, select_ensemble, summarize_architectures, ArchitectureSummary, ClusterEntry, ClusterReport,
    EnsembleChoice, EnsembleSelection,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Confusion { tp, fp, fn_ }
    }
}

impl Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for Confusion {
    fn add_assign(&mut self, o: Confusion) {
        *self = *self + o;
    }
}

impl Sum for Confusion {
    fn sum<I: Iterator<Item = Confusion>>(iter: I) -> Confusion {
        iter.fold(Confusion::default(), Add::add)
    }
}

fn check_ordered(intervals: &[AnomalyInterval], what: &str) -> Result<()> {
    match intervals.iter().find(|iv| iv.start > iv.end) {
        Some(iv) => Err(Error::invalid(format!(
            "{what} interval [{}, {}] has start after end",
            iv.start, iv.end
        ))),
        None => Ok(()),
    }
}

/// Anomaly-level confusion under the overlap rule. Labeled intervals must
/// not overlap each other.
pub fn match_anomalies(predicted: &[AnomalyInterval], labeled: &[AnomalyInterval]) -> Result<Confusion> {
    check_ordered(predicted, "predicted")?;
    check_ordered(labeled, "labeled")?;
    let mut sorted = labeled.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0].overlaps(&w[1])) {
        return Err(Error::invalid(format!(
            "labeled intervals [{}, {}] and [{}, {}] overlap",
            w[0].start, w[0].end, w[1].start, w[1].end
        )));
    }
    let tp = labeled
        .iter()
        .filter(|l| predicted.iter().any(|p| p.overlaps(l)))
        .count();
    let fp = predicted
        .iter()
        .filter(|p| !labeled.iter().any(|l| l.overlaps(p)))
        .count();
    Ok(Confusion::new(tp as u64, fp as u64, (labeled.len() - tp) as u64))
}

fn index_set(intervals: &[AnomalyInterval], len: usize, what: &str) -> Result<BTreeSet<usize>> {
    check_ordered(intervals, what)?;
    let mut set = BTreeSet::new();
    for iv in intervals {
        if iv.end >= len {
            return Err(Error::invalid(format!(
                "{what} interval [{}, {}] exceeds series length {len}",
                iv.start, iv.end
            )));
        }
        set.extend(iv.start..=iv.end);
    }
    Ok(set)
}

/// Time-point confusion over a series of length `len`.
pub fn point_confusion(predicted: &[AnomalyInterval], labeled: &[AnomalyInterval], len: usize) -> Result<Confusion> {
    let p = index_set(predicted, len, "predicted")?;
    let l = index_set(labeled, len, "labeled")?;
    let tp = p.intersection(&l).count() as u64;
    Ok(Confusion::new(tp, p.len() as u64 - tp, l.len() as u64 - tp))
}

/// `100 * 2tp / (2tp + fp + fn)`; `None` when all counts are zero.
pub fn f1(c: Confusion) -> Option<f64> {
    let denom = 2 * c.tp + c.fp + c.fn_;
    (denom > 0).then(|| 100.0 * (2 * c.tp) as f64 / denom as f64)
}

/// F1 percentage earned per second of training.
pub fn f1_per_second(f1_percent: f64, seconds: f64) -> Result<f64> {
    if seconds.is_nan() || seconds <= 0.0 {
        return Err(Error::invalid(format!("training time must be positive, got {seconds}")));
    }
    Ok(f1_percent / seconds)
}

/// One channel's score under one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub channel: String,
    pub architecture: String,
    pub anomaly: Confusion,
    pub point: Confusion,
    pub training_seconds: f64,
}

/// Scores one channel's detections against its labels.
pub fn evaluate_channel(
    channel: &str,
    architecture: &str,
    predicted: &[AnomalyInterval],
    labeled: &[AnomalyInterval],
    test_len: usize,
    training_seconds: f64,
) -> Result<ChannelResult> {
    let tag = |e: Error| Error::InvalidChannel {
        channel: channel.to_string(),
        message: e.to_string(),
    };
    Ok(ChannelResult {
        channel: channel.to_string(),
        architecture: architecture.to_string(),
        anomaly: match_anomalies(predicted, labeled).map_err(tag)?,
        point: point_confusion(predicted, labeled, test_len).map_err(tag)?,
        training_seconds,
    })
}
