// SPDX-License-Identifier: MIT OR Apache-2.0

//! Telemetry anomaly workbench: channel fingerprinting and clustering,
//! per-channel forecasting, dynamic thresholding of forecast errors and
//! range-aware evaluation.

pub mod detect;
pub mod error;
pub mod evaluate;
pub mod forecast;
pub mod ingest;
pub mod seed;
pub mod signature;

pub use error::{Error, Result};
