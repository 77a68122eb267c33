//! Channel-major latent feature grids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ShapeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatentShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl LatentShape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        LatentShape {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("latent contains a non-finite value at flat index {index}")]
pub struct NonFinite {
    pub index: usize,
}

/// A `C×H×W` feature tensor stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    shape: LatentShape,
    values: Vec<f64>,
}

impl LatentGrid {
    pub fn zeros(shape: LatentShape) -> Self {
        LatentGrid {
            shape,
            values: vec![0.0; shape.len()],
        }
    }

    pub fn filled(shape: LatentShape, value: f64) -> Self {
        LatentGrid {
            shape,
            values: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: LatentShape, values: Vec<f64>) -> Result<Self, ShapeError> {
        if values.len() != shape.len() {
            return Err(ShapeError::new("LatentGrid::from_vec", shape, values.len()));
        }
        Ok(LatentGrid { shape, values })
    }

    pub fn from_fn(shape: LatentShape, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    values.push(f(c, x, y));
                }
            }
        }
        LatentGrid { shape, values }
    }

    pub fn shape(&self) -> LatentShape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize) -> usize {
        (c * self.shape.height + y) * self.shape.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.values[self.index(c, x, y)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, value: f64) {
        let i = self.index(c, x, y);
        self.values[i] = value;
    }

    /// Feature vector of one spatial cell, one entry per channel.
    pub fn cell(&self, x: usize, y: usize) -> Vec<f64> {
        (0..self.shape.channels).map(|c| self.get(c, x, y)).collect()
    }

    pub fn check_same_shape(&self, other: &LatentGrid, op: &'static str) -> Result<(), ShapeError> {
        if self.shape != other.shape {
            return Err(ShapeError::new(op, self.shape, other.shape));
        }
        Ok(())
    }

    /// `a·self + b·other`, element-wise.
    pub fn affine(&self, a: f64, other: &LatentGrid, b: f64) -> Result<LatentGrid, ShapeError> {
        self.check_same_shape(other, "affine")?;
        Ok(LatentGrid {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn scale(&self, a: f64) -> LatentGrid {
        LatentGrid {
            shape: self.shape,
            values: self.values.iter().map(|&x| a * x).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &LatentGrid) -> Result<f64, ShapeError> {
        self.check_same_shape(other, "max_abs_diff")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn ensure_finite(&self) -> Result<(), NonFinite> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(NonFinite { index }),
            None => Ok(()),
        }
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &LatentGrid) -> bool {
        self.shape == other.shape
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}
