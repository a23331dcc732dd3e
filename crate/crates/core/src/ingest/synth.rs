// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic channels of five behavior kinds.
//!
//! Each target is an offset plus independent periodic components whose
//! duty cycles are fixed exactly, so the four moments of a kind vary little
//! between channels and the kinds sit roughly equidistant in signature space.
//! Approximate target signatures (mean, std, skewness, excess kurtosis):
//!
//! | kind        | mean   | std   | skew   | kurt   |
//! |-------------|--------|-------|--------|--------|
//! | binary      |  0.46  | 0.89  | -1.05  | -0.90  |
//! | flat        |  0.90  | 0     |  0     |  0     |
//! | oscillating |  0.23  | 0.07  |  0     | -1.44  |
//! | spiky       | -0.43  | 0.20  | -0.62  |  0.08  |
//! | complex     | -0.41  | 0.53  |  0.54  | -0.58  |
//!
//! Column 0 is the target. Each scheduled event type (rise, fall, spike
//! onset) has a command column, set one step before the event, in the order
//! the kind lists them; remaining context columns carry sparse random pulses.
//! Planted anomalies are level shifts in the test split and are never
//! announced by a command.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

use super::{AnomalyInterval, TelemetryChannel};

/// Standard deviation of additive noise on the non-discrete kinds.
pub const NOISE_SIGMA: f64 = 0.01;
/// Shortest accepted train or test length.
pub const MIN_LENGTH: usize = 300;
/// Per-step probability of a pulse on free context columns.
pub const CONTEXT_PULSE_RATE: f64 = 0.01;
pub const SYNTH_SPACECRAFT: &str = "SYNTH";

/// Fraction of time a binary channel spends at +1 (the rest at -1).
const BINARY_DUTY: f64 = 0.732;
const BINARY_PERIOD: (usize, usize) = (40, 120);
const FLAT_LEVEL: f64 = 0.9;
const FLAT_JITTER: f64 = 0.05;
const OSC_OFFSET: f64 = 0.229;
const OSC_AMPLITUDE: f64 = 0.1;
const OSC_PERIOD: (f64, f64) = (30.0, 80.0);
const SPIKY_BASE: f64 = -0.377;
const SPIKY_WOBBLE: f64 = 0.216;
const SPIKY_WOBBLE_PERIOD: (f64, f64) = (150.0, 300.0);
const SPIKY_HEIGHT: f64 = -0.4;
/// One spike of `SPIKY_WIDTH` steps per `SPIKY_PERIOD` steps (12% duty).
const SPIKY_PERIOD: usize = 25;
const SPIKY_WIDTH: usize = 3;
const COMPLEX_OFFSET: f64 = -0.9;
const COMPLEX_WOBBLE: f64 = 0.05;
const COMPLEX_STEP: f64 = 0.906;
const COMPLEX_STEP_DUTY: f64 = 0.438;
const COMPLEX_STEP_PERIOD: (usize, usize) = (150, 300);
const COMPLEX_SPIKE: f64 = 0.944;
const COMPLEX_SPIKE_PERIOD: usize = 30;
const COMPLEX_SPIKE_WIDTH: usize = 3;
/// Multiplicative jitter on amplitudes, uniform in `1 ± AMPLITUDE_JITTER`.
const AMPLITUDE_JITTER: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BehaviorKind {
    Binary,
    Flat,
    Oscillating,
    Spiky,
    Complex,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 5] = [
        BehaviorKind::Binary,
        BehaviorKind::Flat,
        BehaviorKind::Oscillating,
        BehaviorKind::Spiky,
        BehaviorKind::Complex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BehaviorKind::Binary => "binary",
            BehaviorKind::Flat => "flat",
            BehaviorKind::Oscillating => "oscillating",
            BehaviorKind::Spiky => "spiky",
            BehaviorKind::Complex => "complex",
        }
    }
}

impl fmt::Display for BehaviorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BehaviorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BehaviorKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown behavior kind {s:?}")))
    }
}

/// A level shift of `magnitude` over `interval` (test indices).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedAnomaly {
    pub interval: AnomalyInterval,
    pub magnitude: f64,
}

struct Series {
    target: Vec<f64>,
    /// Start steps of each scheduled event type.
    events: Vec<Vec<usize>>,
}

fn jitter(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(1.0 - AMPLITUDE_JITTER..=1.0 + AMPLITUDE_JITTER)
}

fn sine(rng: &mut ChaCha8Rng, len: usize, amplitude: f64, period: (f64, f64)) -> Vec<f64> {
    let p = rng.random_range(period.0..period.1);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    (0..len)
        .map(|t| amplitude * (std::f64::consts::TAU * t as f64 / p + phase).sin())
        .collect()
}

/// Square wave in {0, 1} with exactly `round(duty * period)` high steps per
/// period, with its rise and fall steps.
fn square(rng: &mut ChaCha8Rng, len: usize, period: usize, duty: f64) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let high = (duty * period as f64).round() as usize;
    let phase = rng.random_range(0..period);
    let wave: Vec<f64> = (0..len)
        .map(|t| f64::from(((t + phase) % period < high) as u8))
        .collect();
    let rises = (1..len).filter(|&t| wave[t] > wave[t - 1]).collect();
    let falls = (1..len).filter(|&t| wave[t] < wave[t - 1]).collect();
    (wave, rises, falls)
}

/// One pulse of `width` steps at a random position inside each `period`-step slot.
fn pulses(rng: &mut ChaCha8Rng, len: usize, period: usize, width: usize) -> (Vec<f64>, Vec<usize>) {
    let mut wave = vec![0.0; len];
    let mut events = Vec::new();
    for slot in 0..len.div_ceil(period) {
        let start = slot * period + rng.random_range(0..=period - width);
        for v in wave.iter_mut().skip(start).take(width) {
            *v = 1.0;
        }
        if start < len {
            events.push(start);
        }
    }
    (wave, events)
}

fn generate(kind: BehaviorKind, len: usize, rng: &mut ChaCha8Rng) -> Series {
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let noisy = |mut target: Vec<f64>, rng: &mut ChaCha8Rng| {
        for v in target.iter_mut() {
            *v += noise.sample(rng);
        }
        target
    };
    match kind {
        BehaviorKind::Binary => {
            let period = rng.random_range(BINARY_PERIOD.0..=BINARY_PERIOD.1);
            let (wave, rises, falls) = square(rng, len, period, BINARY_DUTY);
            Series {
                target: wave.iter().map(|w| 2.0 * w - 1.0).collect(),
                events: vec![rises, falls],
            }
        }
        BehaviorKind::Flat => {
            let level = FLAT_LEVEL + rng.random_range(-FLAT_JITTER..=FLAT_JITTER);
            Series {
                target: vec![level; len],
                events: Vec::new(),
            }
        }
        BehaviorKind::Oscillating => {
            let amplitude = OSC_AMPLITUDE * jitter(rng);
            let wave = sine(rng, len, amplitude, OSC_PERIOD);
            let target = wave.iter().map(|w| OSC_OFFSET + w).collect();
            Series {
                target: noisy(target, rng),
                events: Vec::new(),
            }
        }
        BehaviorKind::Spiky => {
            let wobble_amp = SPIKY_WOBBLE * jitter(rng);
            let wobble = sine(rng, len, wobble_amp, SPIKY_WOBBLE_PERIOD);
            let height = SPIKY_HEIGHT * jitter(rng);
            let (spikes, onsets) = pulses(rng, len, SPIKY_PERIOD, SPIKY_WIDTH);
            let target = wobble
                .iter()
                .zip(&spikes)
                .map(|(w, s)| SPIKY_BASE + w + height * s)
                .collect();
            Series {
                target: noisy(target, rng),
                events: vec![onsets],
            }
        }
        BehaviorKind::Complex => {
            let wobble_amp = COMPLEX_WOBBLE * jitter(rng);
            let wobble = sine(rng, len, wobble_amp, OSC_PERIOD);
            let step = COMPLEX_STEP * jitter(rng);
            let period = rng.random_range(COMPLEX_STEP_PERIOD.0..=COMPLEX_STEP_PERIOD.1);
            let (levels, rises, falls) = square(rng, len, period, COMPLEX_STEP_DUTY);
            let spike = COMPLEX_SPIKE * jitter(rng);
            let (spikes, onsets) = pulses(rng, len, COMPLEX_SPIKE_PERIOD, COMPLEX_SPIKE_WIDTH);
            let target = (0..len)
                .map(|t| COMPLEX_OFFSET + wobble[t] + step * levels[t] + spike * spikes[t])
                .collect();
            Series {
                target: noisy(target, rng),
                events: vec![rises, falls, onsets],
            }
        }
    }
}

/// Generates one channel with `1 + n_context` columns. Event types beyond
/// `n_context` go unannounced.
///
/// The process runs over `length_train + length_test` steps and is split
/// afterwards. Anomalies shift the test target away from the channel's
/// mean level (upward when the mean is negative) and become the labels.
/// The random stream does not depend on `anomalies`, so the anomaly-free
/// baseline is the same call with no anomalies.
pub fn synthesize_channel(
    kind: BehaviorKind,
    length_train: usize,
    length_test: usize,
    n_context: usize,
    anomalies: &[PlantedAnomaly],
    seed: u64,
) -> Result<TelemetryChannel> {
    if length_train < MIN_LENGTH || length_test < MIN_LENGTH {
        return Err(Error::invalid(format!(
            "synthetic lengths must be at least {MIN_LENGTH}, got {length_train} and {length_test}"
        )));
    }
    for a in anomalies {
        let iv = a.interval;
        if !(a.magnitude > 0.0 && a.magnitude.is_finite()) {
            return Err(Error::invalid(format!(
                "anomaly magnitude must be positive, got {}",
                a.magnitude
            )));
        }
        if iv.start > iv.end || iv.end >= length_test {
            return Err(Error::invalid(format!(
                "anomaly [{}, {}] outside test length {length_test}",
                iv.start, iv.end
            )));
        }
    }

    let len = length_train + length_test;
    let mut rng = seed::rng(seed::derive(seed, kind.name()));
    let series = generate(kind, len, &mut rng);

    let mut data = Array2::<f64>::zeros((len, 1 + n_context));
    for (t, v) in series.target.iter().enumerate() {
        data[[t, 0]] = *v;
    }
    for col in 1..=n_context {
        match series.events.get(col - 1) {
            Some(starts) => {
                for &e in starts.iter().filter(|&&e| e > 0) {
                    data[[e - 1, col]] = 1.0;
                }
            }
            None => {
                for t in 0..len {
                    data[[t, col]] = f64::from(rng.random_bool(CONTEXT_PULSE_RATE) as u8);
                }
            }
        }
    }

    let mean = series.target.iter().sum::<f64>() / len as f64;
    let direction = if mean < 0.0 { 1.0 } else { -1.0 };
    for a in anomalies {
        for t in a.interval.start..=a.interval.end {
            data[[length_train + t, 0]] += direction * a.magnitude;
        }
    }

    let channel = TelemetryChannel {
        id: format!("{kind}-{seed}"),
        spacecraft: SYNTH_SPACECRAFT.to_string(),
        train: data.slice(s![..length_train, ..]).to_owned(),
        test: data.slice(s![length_train.., ..]).to_owned(),
        target_index: 0,
        labels: anomalies.iter().map(|a| a.interval).collect(),
    };
    channel.validate()?;
    Ok(channel)
}
