//! Flat parameter vectors shared by models, clients, and the server.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Flat model parameters with a per-coordinate trainable mask.
///
/// Frozen coordinates (mask = false) are still carried on the wire so that
/// aggregation stays index-aligned across clients, but optimizers and
/// aggregators never modify them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    trainable: Vec<bool>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, trainable: Vec<bool>) -> Result<Self> {
        if values.is_empty() {
            return Err(CoreError::EmptyInput("ParamVector::new"));
        }
        if values.len() != trainable.len() {
            return Err(CoreError::DimensionMismatch {
                expected: values.len(),
                actual: trainable.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("ParamVector::new"));
        }
        Ok(Self { values, trainable })
    }

    /// All-trainable vector.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(values, mask)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            trainable: self.trainable.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn trainable_mask(&self) -> &[bool] {
        &self.trainable
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Returns `a·x + y` coordinate-wise; masks must match and carry through.
    pub fn axpy(a: f64, x: &ParamVector, y: &ParamVector) -> Result<ParamVector> {
        if x.len() != y.len() {
            return Err(CoreError::DimensionMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if x.trainable != y.trainable {
            return Err(CoreError::InvalidConfig(alloc::string::String::from(
                "axpy: trainable masks differ",
            )));
        }
        let values: Vec<f64> = x
            .values
            .iter()
            .zip(&y.values)
            .map(|(&xv, &yv)| a * xv + yv)
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("axpy"));
        }
        Ok(ParamVector {
            values,
            trainable: x.trainable.clone(),
        })
    }

    /// Euclidean norm of the values.
    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    /// `self − other`, preserving the mask.
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        ParamVector::axpy(-1.0, other, self)
    }

    /// In-place scale of every coordinate.
    pub(crate) fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}
