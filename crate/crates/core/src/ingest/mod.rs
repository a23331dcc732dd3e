// SPDX-License-Identifier: MIT OR Apache-2.0

//! Channel datasets on disk.
//!
//! Layout: `<root>/train/<id>.{npy,csv}`, `<root>/test/<id>.{npy,csv}` and
//! `<root>/labeled_anomalies.csv`. Labels index the target column of the
//! test split, with inclusive bounds.

mod array;
mod labels;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use array::{encode_csv, encode_npy, parse_csv, parse_npy, read_array, write_array, ArrayFormat};
pub use labels::{format_label_row, parse_labels, read_label_rows, LabelRow, LABEL_FILE, LABEL_HEADER};
pub use synth::{synthesize_channel, BehaviorKind, PlantedAnomaly, MIN_LENGTH, NOISE_SIGMA, SYNTH_SPACECRAFT};

pub const TRAIN_DIR: &str = "train";
pub const TEST_DIR: &str = "test";
pub const UNKNOWN_SPACECRAFT: &str = "UNKNOWN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    Point,
    Contextual,
    Unspecified,
}

impl AnomalyKind {
    pub fn from_class(class: &str) -> Self {
        match class.trim().to_ascii_lowercase().as_str() {
            "point" => AnomalyKind::Point,
            "contextual" => AnomalyKind::Contextual,
            _ => AnomalyKind::Unspecified,
        }
    }

    pub fn as_class(self) -> &'static str {
        match self {
            AnomalyKind::Point => "point",
            AnomalyKind::Contextual => "contextual",
            AnomalyKind::Unspecified => "unspecified",
        }
    }
}

/// Inclusive index range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnomalyInterval {
    pub start: usize,
    pub end: usize,
    pub kind: AnomalyKind,
}

impl AnomalyInterval {
    pub fn new(start: usize, end: usize) -> Self {
        AnomalyInterval {
            start,
            end,
            kind: AnomalyKind::Unspecified,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &AnomalyInterval) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// One telemetry channel: rows are time steps, columns are parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryChannel {
    pub id: String,
    pub spacecraft: String,
    pub train: Array2<f64>,
    pub test: Array2<f64>,
    pub target_index: usize,
    pub labels: Vec<AnomalyInterval>,
}

impl TelemetryChannel {
    pub fn dims(&self) -> usize {
        self.train.ncols()
    }

    pub fn train_target(&self) -> ArrayView1<'_, f64> {
        self.train.column(self.target_index)
    }

    pub fn test_target(&self) -> ArrayView1<'_, f64> {
        self.test.column(self.target_index)
    }

    /// Checks the structural invariants of a loaded channel.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::InvalidChannel {
            channel: self.id.clone(),
            message,
        };
        let d = self.train.ncols();
        if d == 0 {
            return Err(fail("channel has no columns".into()));
        }
        if self.test.ncols() != d {
            return Err(fail(format!(
                "train has {d} columns but test has {}",
                self.test.ncols()
            )));
        }
        if self.target_index >= d {
            return Err(fail(format!(
                "target index {} out of range for {d} columns",
                self.target_index
            )));
        }
        let t_test = self.test.nrows();
        for iv in &self.labels {
            if iv.start > iv.end {
                return Err(fail(format!("label [{}, {}] has start after end", iv.start, iv.end)));
            }
            if iv.end >= t_test {
                return Err(fail(format!(
                    "label [{}, {}] exceeds test length {t_test}",
                    iv.start, iv.end
                )));
            }
        }
        if self.train.iter().chain(self.test.iter()).any(|v| !v.is_finite()) {
            return Err(fail("non-finite value".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDescriptor {
    pub id: String,
    pub spacecraft: String,
    pub train_len: usize,
    pub test_len: usize,
    pub dims: usize,
    pub anomalies: usize,
    pub point_anomalies: usize,
    pub contextual_anomalies: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub channels: Vec<ChannelDescriptor>,
    pub total_anomaly_sequences: usize,
    pub total_test_values: usize,
}

impl DatasetManifest {
    pub fn from_channels(channels: &[TelemetryChannel]) -> Self {
        let descriptors: Vec<ChannelDescriptor> = channels
            .iter()
            .map(|c| ChannelDescriptor {
                id: c.id.clone(),
                spacecraft: c.spacecraft.clone(),
                train_len: c.train.nrows(),
                test_len: c.test.nrows(),
                dims: c.dims(),
                anomalies: c.labels.len(),
                point_anomalies: c.labels.iter().filter(|l| l.kind == AnomalyKind::Point).count(),
                contextual_anomalies: c.labels.iter().filter(|l| l.kind == AnomalyKind::Contextual).count(),
            })
            .collect();
        DatasetManifest {
            total_anomaly_sequences: descriptors.iter().map(|d| d.anomalies).sum(),
            total_test_values: descriptors.iter().map(|d| d.test_len).sum(),
            channels: descriptors,
        }
    }

    pub fn point_anomalies(&self) -> usize {
        self.channels.iter().map(|c| c.point_anomalies).sum()
    }

    pub fn contextual_anomalies(&self) -> usize {
        self.channels.iter().map(|c| c.contextual_anomalies).sum()
    }
}

/// Lists `<dir>/<id>.{npy,csv}`; `.npy` wins when both exist.
fn list_arrays(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out: BTreeMap<String, PathBuf> = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(format) = ArrayFormat::from_path(&path) else {
            continue;
        };
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
            continue;
        };
        match out.get(&id) {
            Some(existing) if format == ArrayFormat::Csv && existing.extension().is_some_and(|e| e == "npy") => {}
            _ => {
                out.insert(id, path);
            }
        }
    }
    Ok(out)
}

/// Loads every channel present in both `train/` and `test/`.
///
/// A missing label table means no labels. Channels are returned sorted by id.
pub fn load_dataset(root: &Path) -> Result<(DatasetManifest, Vec<TelemetryChannel>)> {
    let train_files = list_arrays(&root.join(TRAIN_DIR))?;
    let test_files = list_arrays(&root.join(TEST_DIR))?;
    let label_path = root.join(LABEL_FILE);
    let label_rows = if label_path.exists() {
        read_label_rows(&label_path)?
    } else {
        log::warn!("{} not found; channels are unlabeled", label_path.display());
        Vec::new()
    };

    let mut rows_by_id: BTreeMap<&str, &LabelRow> = BTreeMap::new();
    for row in &label_rows {
        if !train_files.contains_key(&row.channel) {
            return Err(Error::MissingChannelFile {
                channel: row.channel.clone(),
                split: TRAIN_DIR,
            });
        }
        if !test_files.contains_key(&row.channel) {
            return Err(Error::MissingChannelFile {
                channel: row.channel.clone(),
                split: TEST_DIR,
            });
        }
        rows_by_id.insert(&row.channel, row);
    }

    let ids: BTreeSet<&String> = train_files.keys().filter(|id| test_files.contains_key(*id)).collect();
    for id in train_files.keys().chain(test_files.keys()) {
        if !ids.contains(id) {
            log::warn!("channel {id} is present in only one split; skipped");
        }
    }

    let mut channels = Vec::with_capacity(ids.len());
    let mut out_of_range = 0;
    for id in ids {
        let train = read_array(&train_files[id])?;
        let test = read_array(&test_files[id])?;
        let row = rows_by_id.get(id.as_str());
        let channel = TelemetryChannel {
            id: id.clone(),
            spacecraft: row.map_or_else(|| UNKNOWN_SPACECRAFT.to_string(), |r| r.spacecraft.clone()),
            train,
            test,
            target_index: 0,
            labels: row.map(|r| r.intervals.clone()).unwrap_or_default(),
        };
        channel.validate()?;
        if let Some(r) = row {
            if r.num_values != channel.test.nrows() {
                log::warn!(
                    "channel {id}: label table says {} test values, file has {}",
                    r.num_values,
                    channel.test.nrows()
                );
            }
        }
        if channel.train.iter().chain(channel.test.iter()).any(|v| v.abs() > 1.0) {
            log::debug!("channel {id}: values outside [-1, 1]");
            out_of_range += 1;
        }
        channels.push(channel);
    }
    if out_of_range > 0 {
        log::warn!(
            "{out_of_range} of {} channels have values outside [-1, 1]",
            channels.len()
        );
    }
    Ok((DatasetManifest::from_channels(&channels), channels))
}

/// Writes channels in the layout [`load_dataset`] reads.
pub fn write_dataset(root: &Path, channels: &[TelemetryChannel], format: ArrayFormat) -> Result<()> {
    let train_dir = root.join(TRAIN_DIR);
    let test_dir = root.join(TEST_DIR);
    for dir in [&train_dir, &test_dir] {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut table = String::from(LABEL_HEADER);
    table.push('\n');
    for channel in channels {
        channel.validate()?;
        let file = format!("{}.{}", channel.id, format.extension());
        write_array(&train_dir.join(&file), &channel.train, format)?;
        write_array(&test_dir.join(&file), &channel.test, format)?;
        if !channel.labels.is_empty() {
            table.push_str(&format_label_row(&LabelRow {
                channel: channel.id.clone(),
                spacecraft: channel.spacecraft.clone(),
                intervals: channel.labels.clone(),
                num_values: channel.test.nrows(),
            }));
            table.push('\n');
        }
    }
    let label_path = root.join(LABEL_FILE);
    std::fs::write(&label_path, table).map_err(|e| Error::io(&label_path, e))
}
