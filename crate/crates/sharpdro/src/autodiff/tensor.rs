//! Dense row-major f64 tensors.

use serde::{Deserialize, Serialize};

use super::AutodiffError;

/// A dense tensor of 64-bit floats in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking that the extents match the data length.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, AutodiffError> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(AutodiffError::ShapeMismatch {
                expected: format!("{expect} values for shape {shape:?}"),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    /// A 2-D tensor from rows-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AutodiffError> {
        Self::new(vec![rows, cols], data)
    }

    /// All-zero tensor.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Number of rows for a 2-D tensor.
    pub fn nrows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Number of columns for a 2-D tensor.
    pub fn ncols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(0)
    }

    /// Row `i` of a 2-D tensor as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.ncols();
        &self.data[i * cols..(i + 1) * cols]
    }

    /// Gathers the given rows of a 2-D tensor into a new tensor.
    pub fn gather_rows(&self, idx: &[usize]) -> Tensor {
        let cols = self.ncols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor {
            shape: vec![idx.len(), cols],
            data,
        }
    }

    /// Errors if any entry is NaN or infinite.
    pub fn check_finite(&self, context: &str) -> Result<(), AutodiffError> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(AutodiffError::NonFinite {
                context: context.to_string(),
            })
        }
    }
}
