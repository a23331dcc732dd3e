// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Four central-moment fingerprint of a series.
///
/// Population standard deviation, biased skewness `m3 / m2^1.5` and excess
/// kurtosis `m4 / m2^2 - 3`. Undefined moments (zero variance) are stored as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSignature {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl ChannelSignature {
    pub fn to_array(self) -> [f64; 4] {
        [self.mean, self.std, self.skewness, self.kurtosis]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        ChannelSignature {
            mean: v[0],
            std: v[1],
            skewness: v[2],
            kurtosis: v[3],
        }
    }
}

fn nan_to_zero(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v
    }
}

pub fn compute_signature(series: &[f64]) -> Result<ChannelSignature> {
    if series.len() < 2 {
        return Err(Error::invalid(format!(
            "signature needs at least 2 values, got {}",
            series.len()
        )));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value at index {i}")));
    }
    let first = series[0];
    if series.iter().all(|&v| v == first) {
        return Ok(ChannelSignature {
            mean: first,
            std: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
        });
    }

    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in series {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    Ok(ChannelSignature {
        mean,
        std: m2.sqrt(),
        skewness: nan_to_zero(m3 / m2.powf(1.5)),
        kurtosis: nan_to_zero(m4 / (m2 * m2) - 3.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_exact() {
        let s = compute_signature(&[5.0; 4]).unwrap();
        assert_eq!(s.to_array(), [5.0, 0.0, 0.0, 0.0]);
        // a mean that does not round-trip through summation must still be exact
        let s = compute_signature(&[0.1; 1000]).unwrap();
        assert_eq!(s.to_array(), [0.1, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn symmetric_two_level_series() {
        let series: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let s = compute_signature(&series).unwrap();
        assert_eq!(s.mean, 0.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert!(s.skewness.abs() < 1e-15);
        assert!((s.kurtosis + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(compute_signature(&[1.0]).is_err());
        assert!(compute_signature(&[]).is_err());
        assert!(compute_signature(&[1.0, f64::NAN]).is_err());
        assert!(compute_signature(&[1.0, f64::INFINITY]).is_err());
    }
}
