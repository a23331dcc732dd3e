// SPDX-License-Identifier: MIT OR Apache-2.0

//! Self-describing JSON archive for a trained forecaster.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Model, TrainedForecaster};

pub const ARCHIVE_FORMAT: &str = "tal-forecaster";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Archive {
    format: String,
    version: u32,
    #[serde(flatten)]
    forecaster: TrainedForecaster,
}

pub fn save_archive(path: &Path, forecaster: &TrainedForecaster) -> Result<()> {
    let archive = Archive {
        format: ARCHIVE_FORMAT.to_string(),
        version: ARCHIVE_VERSION,
        forecaster: forecaster.clone(),
    };
    let mut text = serde_json::to_string_pretty(&archive)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_archive(path: &Path) -> Result<TrainedForecaster> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let archive: Archive = serde_json::from_str(&text)?;
    if archive.format != ARCHIVE_FORMAT {
        return Err(Error::invalid(format!(
            "{}: not a forecaster archive (format {:?})",
            path.display(),
            archive.format
        )));
    }
    if archive.version != ARCHIVE_VERSION {
        return Err(Error::invalid(format!(
            "{}: unsupported archive version {}",
            path.display(),
            archive.version
        )));
    }
    let f = archive.forecaster;
    f.spec.validate()?;
    let expected = Model::new(&f.spec, f.dims).map_or(0, |m| m.num_params());
    if f.standardizer.mean.len() != f.dims || f.standardizer.scale.len() != f.dims {
        return Err(Error::invalid(format!(
            "{}: standardizer does not cover {} columns",
            path.display(),
            f.dims
        )));
    }
    let found: usize = f.weights.iter().map(|b| b.values.len()).sum();
    if expected != found {
        return Err(Error::invalid(format!(
            "{}: archive holds {found} weights, spec needs {expected}",
            path.display()
        )));
    }
    Ok(f)
}

/// JSON of everything that training determines: spec, column count,
/// standardization and weights. Excludes the wall-clock duration.
pub fn weights_json(forecaster: &TrainedForecaster) -> Result<String> {
    Ok(serde_json::to_string(&(
        &forecaster.spec,
        forecaster.dims,
        &forecaster.standardizer,
        &forecaster.weights,
    ))?)
}
