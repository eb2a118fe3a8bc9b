use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index/value pairs with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a vector from `(index, value)` pairs, which must be sorted by
    /// index without repeats. Zero values are dropped.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut v = SparseVector::zeros(dim);
        for (i, x) in entries {
            if i >= dim {
                return Err(Error::validation(format!("index {i} out of range for dimension {dim}")));
            }
            if !x.is_finite() {
                return Err(Error::validation(format!("non-finite value at index {i}")));
            }
            if v.indices.last().is_some_and(|&last| last >= i) {
                return Err(Error::validation("sparse indices must be strictly increasing"));
            }
            if x != 0.0 {
                v.indices.push(i);
                v.values.push(x);
            }
        }
        Ok(v)
    }

    pub fn from_dense(values: &[f64]) -> Result<Self> {
        SparseVector::new(values.len(), values.iter().copied().enumerate())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Dot product with a dense vector of at least `dim` entries.
    #[inline]
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    /// `dense += alpha * self`
    #[inline]
    pub fn axpy_into(&self, alpha: f64, dense: &mut [f64]) {
        for (i, v) in self.iter() {
            dense[i] += alpha * v;
        }
    }

    pub fn scaled(&self, alpha: f64) -> SparseVector {
        if alpha == 0.0 {
            return SparseVector::zeros(self.dim);
        }
        SparseVector {
            dim: self.dim,
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * alpha).collect(),
        }
    }

    /// Unit Euclidean norm; the zero vector stays zero.
    pub fn l2_normalized(mut self) -> SparseVector {
        let norm = self.norm();
        if norm > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= norm);
        }
        self
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.axpy_into(1.0, &mut out);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
