// SPDX-License-Identifier: MIT OR Apache-2.0

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};

/// Sliding windows over a channel matrix with next-step targets.
///
/// Window `i` covers rows `i..i + w` (all columns) and its target is the
/// target column at row `i + w`. Windows are served as views into one
/// row-major copy of the data rather than materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    data: Array2<f64>,
    window: usize,
    target_index: usize,
}

pub fn make_windows(data: &Array2<f64>, target_index: usize, window: usize) -> Result<WindowedDataset> {
    let (t, d) = data.dim();
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    if target_index >= d {
        return Err(Error::invalid(format!(
            "target index {target_index} out of range for {d} columns"
        )));
    }
    if t <= window {
        return Err(Error::invalid(format!(
            "series of length {t} is not longer than the window ({window})"
        )));
    }
    Ok(WindowedDataset {
        data: data.as_standard_layout().into_owned(),
        window,
        target_index,
    })
}

impl WindowedDataset {
    /// Number of windows, `T - w`.
    pub fn len(&self) -> usize {
        self.data.nrows() - self.window
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn dims(&self) -> usize {
        self.data.ncols()
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    /// Window `i` flattened row-major: `w * D` values, oldest step first.
    pub fn input(&self, i: usize) -> &[f64] {
        let d = self.dims();
        let flat = self.data.as_slice().expect("standard layout");
        &flat[i * d..(i + self.window) * d]
    }

    pub fn input_view(&self, i: usize) -> ArrayView2<'_, f64> {
        self.data.slice(ndarray::s![i..i + self.window, ..])
    }

    pub fn target(&self, i: usize) -> f64 {
        self.data[[i + self.window, self.target_index]]
    }

    pub fn targets(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.target(i)).collect()
    }

    /// Materializes the `[N, w, D]` input tensor.
    pub fn to_tensor(&self) -> Array3<f64> {
        let (n, w, d) = (self.len(), self.window, self.dims());
        Array3::from_shape_fn((n, w, d), |(i, s, j)| self.data[[i + s, j]])
    }
}
