use std::ops::Index;

use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;

/// A real value per point of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: &MetricMeasureSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Invalid(format!(
                "field has {} values but the space has {} points",
                values.len(),
                space.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "field value at point {i} is not finite"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_fn(space: &MetricMeasureSpace, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new(space, (0..space.len()).map(f).collect())
    }

    pub fn constant(space: &MetricMeasureSpace, c: f64) -> Self {
        Self {
            values: vec![c; space.len()],
        }
    }

    /// 1 on `ids`, 0 elsewhere.
    pub fn indicator(space: &MetricMeasureSpace, ids: &[usize]) -> Result<Self> {
        let mut values = vec![0.0; space.len()];
        for &i in ids {
            if i >= space.len() {
                return Err(Error::Invalid(format!("point id {i} out of range")));
            }
            values[i] = 1.0;
        }
        Ok(Self { values })
    }

    /// Wraps values already known to be finite and of the right length.
    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * f + b`
    pub fn affine(&self, a: f64, b: f64) -> Self {
        self.map(|v| a * v + b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
