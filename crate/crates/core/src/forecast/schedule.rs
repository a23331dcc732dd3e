// SPDX-License-Identifier: MIT OR Apache-2.0

//! Learning-rate control: a one-cycle schedule whose ceiling is lowered by a
//! plateau rule on epoch losses.

use std::f64::consts::PI;

/// Fraction of steps spent warming up.
pub const WARMUP_FRACTION: f64 = 0.3;
/// Warmup starts at `base / WARMUP_DIV`.
pub const WARMUP_DIV: f64 = 25.0;
/// Cosine decay ends at `base / FINAL_DIV`.
pub const FINAL_DIV: f64 = 1e4;
/// Relative epoch-loss improvement below which an epoch counts as a plateau.
pub const PLATEAU_THRESHOLD: f64 = 1e-4;

/// Rate at `step` of `total` (0-based): linear ramp from `base / 25` to
/// `base` over the first 30% of steps, then cosine decay to `base / 1e4`.
pub fn one_cycle(base: f64, step: usize, total: usize) -> f64 {
    let total = total.max(1);
    let warm = ((WARMUP_FRACTION * total as f64).ceil() as usize).max(1);
    let start = base / WARMUP_DIV;
    let end = base / FINAL_DIV;
    if step < warm {
        return start + (base - start) * step as f64 / warm as f64;
    }
    let span = total.saturating_sub(warm);
    let p = if span <= 1 {
        1.0
    } else {
        ((step - warm) as f64 / (span - 1) as f64).min(1.0)
    };
    end + (base - end) * 0.5 * (1.0 + (PI * p).cos())
}

/// Multiplies the schedule ceiling by `factor` after `patience` consecutive
/// epochs whose relative loss improvement is below [`PLATEAU_THRESHOLD`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauRule {
    pub patience: usize,
    pub factor: f64,
    pub scale: f64,
    previous: Option<f64>,
    stalled: usize,
}

impl PlateauRule {
    pub fn new(patience: usize, factor: f64) -> Self {
        PlateauRule {
            patience: patience.max(1),
            factor,
            scale: 1.0,
            previous: None,
            stalled: 0,
        }
    }

    /// Records one epoch loss; returns true when the ceiling was lowered.
    pub fn observe(&mut self, loss: f64) -> bool {
        let Some(prev) = self.previous.replace(loss) else {
            return false;
        };
        let improvement = if prev > 0.0 { (prev - loss) / prev } else { 0.0 };
        if improvement < PLATEAU_THRESHOLD {
            self.stalled += 1;
        } else {
            self.stalled = 0;
        }
        if self.stalled >= self.patience {
            self.stalled = 0;
            self.scale *= self.factor;
            true
        } else {
            false
        }
    }
}
