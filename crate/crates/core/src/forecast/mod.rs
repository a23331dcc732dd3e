// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-channel next-step forecasters.
//!
//! A forecaster reads a window of `w` rows (all columns) and predicts the
//! target column one step past the window. Trainable families are fitted by
//! minibatch SGD on squared error, under a one-cycle learning-rate schedule
//! with a plateau rule on the ceiling.
//!
//! Trainable families see every column standardized by its training mean
//! and standard deviation (columns without spread are only centered), and
//! predict the standardized target. Predictions are mapped back to signal
//! units.
//!
//! The step size is divided by `max(1, mean |x|^2)` over the training inputs
//! (the flattened window, or one row for the recurrent cell), which keeps a
//! single `base_lr` stable across window lengths and column counts.

mod archive;
mod network;
mod schedule;
mod window;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TelemetryChannel;
use crate::seed;

pub use archive::{load_archive, save_archive, weights_json, ARCHIVE_FORMAT, ARCHIVE_VERSION};
pub use network::{Gru, Linear, Mlp, Network};
pub use schedule::{one_cycle, PlateauRule, FINAL_DIV, PLATEAU_THRESHOLD, WARMUP_DIV, WARMUP_FRACTION};
pub use window::{make_windows, WindowedDataset};

pub const DEFAULT_WINDOW: usize = 100;
pub const BATCH_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Persistence,
    LinearAr,
    Mlp,
    Recurrent,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Persistence, Family::LinearAr, Family::Mlp, Family::Recurrent];

    pub fn name(self) -> &'static str {
        match self {
            Family::Persistence => "persistence",
            Family::LinearAr => "linear_ar",
            Family::Mlp => "mlp",
            Family::Recurrent => "recurrent",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Family::Mlp | Family::Recurrent)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown forecaster family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    pub family: Family,
    pub window: usize,
    /// Steps ahead; only 1 is supported.
    pub horizon: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub base_lr: f64,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub seed: u64,
}

impl ForecasterSpec {
    /// Default settings for a family.
    pub fn preset(family: Family) -> Self {
        let (hidden, epochs, base_lr) = match family {
            Family::Persistence => (0, 0, 0.0),
            Family::LinearAr => (0, 60, 1.0),
            Family::Mlp => (32, 20, 0.1),
            Family::Recurrent => (16, 8, 0.1),
        };
        ForecasterSpec {
            family,
            window: DEFAULT_WINDOW,
            horizon: 1,
            hidden,
            epochs,
            base_lr,
            lr_patience: 1,
            lr_factor: 0.5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("window must be at least 1"));
        }
        if self.horizon != 1 {
            return Err(Error::invalid(format!("horizon must be 1, got {}", self.horizon)));
        }
        if self.family.is_neural() && self.hidden == 0 {
            return Err(Error::invalid(format!(
                "{} needs at least one hidden unit",
                self.family
            )));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(Error::invalid(format!(
                "lr_factor must lie in (0, 1), got {}",
                self.lr_factor
            )));
        }
        if self.family != Family::Persistence && !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::invalid(format!(
                "base_lr must be positive, got {}",
                self.base_lr
            )));
        }
        Ok(())
    }
}

/// A trainable family instantiated for a window and column count.
#[derive(Debug, Clone, Copy)]
pub enum Model {
    Linear(Linear),
    Mlp(Mlp),
    Gru(Gru),
}

impl Model {
    /// `None` for persistence, which has no parameters.
    pub fn new(spec: &ForecasterSpec, dims: usize) -> Option<Model> {
        let inputs = spec.window * dims;
        match spec.family {
            Family::Persistence => None,
            Family::LinearAr => Some(Model::Linear(Linear { inputs })),
            Family::Mlp => Some(Model::Mlp(Mlp {
                inputs,
                hidden: spec.hidden,
            })),
            Family::Recurrent => Some(Model::Gru(Gru {
                steps: spec.window,
                dims,
                hidden: spec.hidden,
            })),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Model::Linear(n) => n.num_params(),
            Model::Mlp(n) => n.num_params(),
            Model::Gru(n) => n.num_params(),
        }
    }

    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        match self {
            Model::Linear(n) => n.layout(),
            Model::Mlp(n) => n.layout(),
            Model::Gru(n) => n.layout(),
        }
    }

    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Model::Linear(n) => n.init(rng),
            Model::Mlp(n) => n.init(rng),
            Model::Gru(n) => n.init(rng),
        }
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> f64 {
        match self {
            Model::Linear(n) => n.forward(params, input),
            Model::Mlp(n) => n.forward(params, input),
            Model::Gru(n) => n.forward(params, input),
        }
    }

    pub fn backward(&self, params: &[f64], input: &[f64], scale: f64, grad: &mut [f64]) {
        match self {
            Model::Linear(n) => n.backward(params, input, scale, grad),
            Model::Mlp(n) => n.backward(params, input, scale, grad),
            Model::Gru(n) => n.backward(params, input, scale, grad),
        }
    }

    /// Rows per model input vector: the whole window, or one row for the recurrent cell.
    fn input_rows(&self, window: usize) -> usize {
        match self {
            Model::Gru(_) => 1,
            _ => window,
        }
    }
}

/// One named parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Relative standard deviation below which a column counts as constant.
pub const SPREAD_TOLERANCE: f64 = 1e-9;

/// Per-column affine map `z = (x - mean) / scale` fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, or 1 where it is within rounding
    /// noise of zero.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dims: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dims],
            scale: vec![1.0; dims],
        }
    }

    pub fn fit(data: &Array2<f64>) -> Self {
        let n = data.nrows().max(1) as f64;
        let (mean, scale) = data
            .columns()
            .into_iter()
            .map(|col| {
                let m = col.sum() / n;
                let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
                let spread = sd > SPREAD_TOLERANCE * m.abs().max(1.0);
                (m, if spread { sd } else { 1.0 })
            })
            .unzip();
        Standardizer { mean, scale }
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, data: &Array2<f64>) -> Array2<f64> {
        let mut out = data.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.scale[j]);
        }
        out
    }

    /// Maps a standardized value of column `j` back to signal units.
    pub fn invert(&self, j: usize, z: f64) -> f64 {
        self.mean[j] + self.scale[j] * z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForecaster {
    pub spec: ForecasterSpec,
    /// Column count of the data the model was fitted on.
    pub dims: usize,
    pub standardizer: Standardizer,
    pub weights: Vec<WeightBlock>,
    pub training_seconds: f64,
    /// Mean training loss per epoch.
    pub loss_history: Vec<f64>,
}

impl TrainedForecaster {
    /// Concatenated parameter vector in layout order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.weights.iter().flat_map(|b| b.values.iter().copied()).collect()
    }

    fn model(&self) -> Option<Model> {
        Model::new(&self.spec, self.dims)
    }

    /// Rebuilds a forecaster from a flat parameter vector, with identity
    /// standardization.
    pub fn from_params(spec: ForecasterSpec, dims: usize, params: &[f64]) -> Result<Self> {
        spec.validate()?;
        let weights = match Model::new(&spec, dims) {
            None => Vec::new(),
            Some(model) => {
                if params.len() != model.num_params() {
                    return Err(Error::invalid(format!(
                        "{} with window {} over {dims} columns has {} parameters, got {}",
                        spec.family,
                        spec.window,
                        model.num_params(),
                        params.len()
                    )));
                }
                split_blocks(&model, params)
            }
        };
        Ok(TrainedForecaster {
            spec,
            dims,
            standardizer: Standardizer::identity(dims),
            weights,
            training_seconds: 0.0,
            loss_history: Vec::new(),
        })
    }
}

fn split_blocks(model: &Model, params: &[f64]) -> Vec<WeightBlock> {
    let mut offset = 0;
    model
        .layout()
        .into_iter()
        .map(|(name, shape)| {
            let n: usize = shape.iter().product();
            let block = WeightBlock {
                name: name.to_string(),
                shape,
                values: params[offset..offset + n].to_vec(),
            };
            offset += n;
            block
        })
        .collect()
}

/// Divisor applied to the step size: `max(1, mean squared norm of model inputs)`.
/// Each model input vector spans `rows` rows of a window.
fn input_scale(ds: &WindowedDataset, rows: usize) -> f64 {
    let total: f64 = (0..ds.len())
        .map(|i| ds.input(i).iter().map(|v| v * v).sum::<f64>())
        .sum();
    let vectors = ds.len() * (ds.window() / rows);
    (total / vectors as f64).max(1.0)
}

/// Fits `spec` to the channel's training split.
pub fn train(spec: &ForecasterSpec, channel: &TelemetryChannel) -> Result<TrainedForecaster> {
    train_on(spec, &channel.train, channel.target_index)
}

/// Fits `spec` to a data matrix whose column `target_index` is forecast.
pub fn train_on(spec: &ForecasterSpec, data: &Array2<f64>, target_index: usize) -> Result<TrainedForecaster> {
    spec.validate()?;
    let dims = data.ncols();
    let Some(model) = Model::new(spec, dims) else {
        make_windows(data, target_index, spec.window)?;
        return Ok(TrainedForecaster {
            spec: spec.clone(),
            dims,
            standardizer: Standardizer::identity(dims),
            weights: Vec::new(),
            training_seconds: 0.0,
            loss_history: Vec::new(),
        });
    };

    let started = Instant::now();
    let standardizer = Standardizer::fit(data);
    let ds = make_windows(&standardizer.apply(data), target_index, spec.window)?;
    let mut rng = seed::rng(seed::derive(spec.seed, "train"));
    let mut params = model.init(&mut rng);
    let scale = input_scale(&ds, model.input_rows(spec.window));
    let n = ds.len();
    let batches_per_epoch = n.div_ceil(BATCH_SIZE);
    let total_steps = spec.epochs * batches_per_epoch;
    let mut plateau = PlateauRule::new(spec.lr_patience, spec.lr_factor);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; params.len()];
    let mut loss_history = Vec::with_capacity(spec.epochs);
    let mut step = 0;

    for epoch in 1..=spec.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(BATCH_SIZE) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let coeff = 2.0 / batch.len() as f64;
            for &i in batch {
                let x = ds.input(i);
                let err = model.forward(&params, x) - ds.target(i);
                epoch_loss += err * err;
                model.backward(&params, x, coeff * err, &mut grad);
            }
            let lr = plateau.scale * one_cycle(spec.base_lr, step, total_steps) / scale;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
            step += 1;
            if !epoch_loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    loss: epoch_loss / n as f64,
                });
            }
        }
        let loss = epoch_loss / n as f64;
        loss_history.push(loss);
        if plateau.observe(loss) {
            log::debug!("epoch {epoch}: loss {loss:.3e} plateaued, ceiling x{}", plateau.scale);
        }
    }

    Ok(TrainedForecaster {
        spec: spec.clone(),
        dims,
        standardizer,
        weights: split_blocks(&model, &params),
        training_seconds: started.elapsed().as_secs_f64(),
        loss_history,
    })
}

/// Predictions for test indices `w..T_test`; entry `i` forecasts index `i + w`.
pub fn predict(forecaster: &TrainedForecaster, test: &Array2<f64>, target_index: usize) -> Result<Vec<f64>> {
    if test.ncols() != forecaster.dims {
        return Err(Error::DimensionMismatch {
            expected: forecaster.dims,
            actual: test.ncols(),
        });
    }
    let w = forecaster.spec.window;
    let out: Vec<f64> = match forecaster.model() {
        None => {
            let ds = make_windows(test, target_index, w)?;
            (0..ds.len()).map(|i| ds.input_view(i)[[w - 1, target_index]]).collect()
        }
        Some(model) => {
            let norm = &forecaster.standardizer;
            if norm.dims() != test.ncols() || norm.scale.len() != test.ncols() {
                return Err(Error::invalid(format!(
                    "standardizer covers {} columns, data has {}",
                    norm.dims(),
                    test.ncols()
                )));
            }
            let ds = make_windows(&norm.apply(test), target_index, w)?;
            let params = forecaster.flat_params();
            if params.len() != model.num_params() {
                return Err(Error::invalid(format!(
                    "forecaster holds {} parameters, its spec needs {}",
                    params.len(),
                    model.num_params()
                )));
            }
            (0..ds.len())
                .map(|i| norm.invert(target_index, model.forward(&params, ds.input(i))))
                .collect()
        }
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("forecaster produced a non-finite prediction"));
    }
    Ok(out)
}

/// Predicts over a channel's test split.
pub fn predict_channel(forecaster: &TrainedForecaster, channel: &TelemetryChannel) -> Result<Vec<f64>> {
    predict(forecaster, &channel.test, channel.target_index)
}

/// Minimum number of weights probed by [`gradient_check`].
pub const GRADIENT_CHECK_SAMPLES: usize = 100;
pub const GRADIENT_CHECK_STEP: f64 = 1e-5;

fn batch_loss(model: &Model, params: &[f64], batch: &WindowedDataset) -> f64 {
    let n = batch.len() as f64;
    (0..batch.len())
        .map(|i| {
            let e = model.forward(params, batch.input(i)) - batch.target(i);
            e * e
        })
        .sum::<f64>()
        / n
}

/// Largest relative disagreement between the analytic MSE gradient over
/// `batch` and central finite differences (step 1e-5), probed on a seeded
/// sample of at least 100 weights (all of them when fewer). Weights come
/// from the family's initializer under `spec.seed`.
pub fn gradient_check(spec: &ForecasterSpec, batch: &WindowedDataset) -> Result<f64> {
    spec.validate()?;
    if batch.window() != spec.window {
        return Err(Error::invalid(format!(
            "batch window {} does not match spec window {}",
            batch.window(),
            spec.window
        )));
    }
    let model = Model::new(spec, batch.dims())
        .ok_or_else(|| Error::invalid(format!("{} has no parameters to check", spec.family)))?;
    let mut rng = seed::rng(seed::derive(spec.seed, "gradient-check"));
    let params = model.init(&mut rng);
    Ok(gradient_error(&model, &params, batch, &mut rng))
}

/// [`gradient_check`] at explicit parameter values.
pub fn gradient_error<R: Rng>(model: &Model, params: &[f64], batch: &WindowedDataset, rng: &mut R) -> f64 {
    let mut grad = vec![0.0; params.len()];
    let coeff = 2.0 / batch.len() as f64;
    for i in 0..batch.len() {
        let x = batch.input(i);
        let err = model.forward(params, x) - batch.target(i);
        model.backward(params, x, coeff * err, &mut grad);
    }

    let mut indices: Vec<usize> = (0..params.len()).collect();
    if indices.len() > GRADIENT_CHECK_SAMPLES {
        indices.shuffle(rng);
        indices.truncate(GRADIENT_CHECK_SAMPLES);
    }
    let h = GRADIENT_CHECK_STEP;
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for &k in &indices {
        probe[k] = params[k] + h;
        let up = batch_loss(model, &probe, batch);
        probe[k] = params[k] - h;
        let down = batch_loss(model, &probe, batch);
        probe[k] = params[k];
        let fd = (up - down) / (2.0 * h);
        let denom = grad[k].abs().max(fd.abs()).max(1e-8);
        worst = worst.max((grad[k] - fd).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    fn column(values: &[f64]) -> Array2<f64> {
        Array::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
    }

    #[test]
    fn persistence_repeats_previous_target() {
        let spec = ForecasterSpec {
            window: 3,
            ..ForecasterSpec::preset(Family::Persistence)
        };
        let data = column(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let f = train_on(&spec, &data, 0).unwrap();
        assert_eq!(f.training_seconds, 0.0);
        assert!(f.loss_history.is_empty());
        assert_eq!(predict(&f, &data, 0).unwrap(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn linear_prediction_is_a_dot_product() {
        let spec = ForecasterSpec {
            window: 2,
            ..ForecasterSpec::preset(Family::LinearAr)
        };
        let data = ndarray::array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]];
        // window rows flattened: [y0, c0, y1, c1]
        let f = TrainedForecaster::from_params(spec, 2, &[0.5, 0.01, -1.0, 0.02, 0.25]).unwrap();
        let expected: Vec<f64> = (0..2)
            .map(|i| {
                let (y0, c0, y1, c1) = (data[[i, 0]], data[[i, 1]], data[[i + 1, 0]], data[[i + 1, 1]]);
                0.5 * y0 + 0.01 * c0 - 1.0 * y1 + 0.02 * c1 + 0.25
            })
            .collect();
        assert_eq!(predict(&f, &data, 0).unwrap(), expected);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = ForecasterSpec {
            window: 2,
            ..ForecasterSpec::preset(Family::Persistence)
        };
        let f = train_on(&spec, &column(&[0.0, 1.0, 2.0]), 0).unwrap();
        let wide = Array2::<f64>::zeros((5, 2));
        assert!(matches!(predict(&f, &wide, 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn spec_validation() {
        let mut s = ForecasterSpec::preset(Family::Mlp);
        assert!(s.validate().is_ok());
        s.hidden = 0;
        assert!(s.validate().is_err());
        let mut s = ForecasterSpec::preset(Family::LinearAr);
        s.lr_factor = 1.0;
        assert!(s.validate().is_err());
        s.lr_factor = 0.5;
        s.horizon = 2;
        assert!(s.validate().is_err());
        assert_eq!("linear_ar".parse::<Family>().unwrap(), Family::LinearAr);
        assert!("lstm".parse::<Family>().is_err());
    }

    #[test]
    fn divergence_names_the_epoch() {
        let spec = ForecasterSpec {
            window: 2,
            epochs: 5,
            base_lr: 1e6,
            ..ForecasterSpec::preset(Family::LinearAr)
        };
        let data = column(&(0..400).map(|i| (i as f64 * 0.3).sin()).collect::<Vec<_>>());
        match train_on(&spec, &data, 0) {
            Err(Error::Divergence { epoch, .. }) => assert!((1..=5).contains(&epoch)),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn loss_history_has_one_entry_per_epoch() {
        let spec = ForecasterSpec {
            window: 4,
            epochs: 3,
            hidden: 4,
            ..ForecasterSpec::preset(Family::Mlp)
        };
        let data = column(&(0..200).map(|i| (i as f64 * 0.2).cos() * 0.5).collect::<Vec<_>>());
        let f = train_on(&spec, &data, 0).unwrap();
        assert_eq!(f.loss_history.len(), 3);
        assert!(f.training_seconds > 0.0);
        assert!(f.loss_history.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn zero_network_bias_gradient_is_exact() {
        let spec = ForecasterSpec {
            window: 3,
            hidden: 2,
            ..ForecasterSpec::preset(Family::Mlp)
        };
        let data = Array2::<f64>::zeros((10, 1));
        let ds = make_windows(&data, 0, 3).unwrap();
        let model = Model::new(&spec, 1).unwrap();
        let params = vec![0.0; model.num_params()];
        let err = gradient_error(&model, &params, &ds, &mut seed::rng(0));
        assert_eq!(err, 0.0);
    }
}
