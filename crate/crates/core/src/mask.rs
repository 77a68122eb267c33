//! Boolean occupancy grids.

use serde::{Deserialize, Serialize};

use crate::error::ShapeError;

/// Which raster a mask annotates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Image,
    Latent,
}

/// Inclusive cell bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BoundingBox {
    pub fn center(&self) -> (f64, f64) {
        (
            (self.min_x + self.max_x) as f64 / 2.0,
            (self.min_y + self.max_y) as f64 / 2.0,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    resolution: Resolution,
    cells: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize, resolution: Resolution) -> Self {
        Mask {
            width,
            height,
            resolution,
            cells: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize, resolution: Resolution) -> Self {
        Mask {
            width,
            height,
            resolution,
            cells: vec![true; width * height],
        }
    }

    /// Builds a mask from a row-major cell vector.
    pub fn from_cells(width: usize, height: usize, resolution: Resolution, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), width * height, "cell count must equal width*height");
        Mask {
            width,
            height,
            resolution,
            cells,
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        resolution: Resolution,
        f: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                cells.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            resolution,
            cells,
        }
    }

    /// Axis-aligned rectangle `[x0, x0+w) × [y0, y0+h)`, clipped to the grid.
    pub fn rect(
        width: usize,
        height: usize,
        resolution: Resolution,
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
    ) -> Self {
        Mask::from_fn(width, height, resolution, |x, y| {
            x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn with_resolution(mut self, resolution: Resolution) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.cells[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut bbox: Option<BoundingBox> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                bbox = Some(match bbox {
                    None => BoundingBox {
                        min_x: x,
                        min_y: y,
                        max_x: x,
                        max_y: y,
                    },
                    Some(b) => BoundingBox {
                        min_x: b.min_x.min(x),
                        min_y: b.min_y.min(y),
                        max_x: b.max_x.max(x),
                        max_y: b.max_y.max(y),
                    },
                });
            }
        }
        bbox
    }

    pub fn check_same_shape(&self, other: &Mask, op: &'static str) -> Result<(), ShapeError> {
        if self.dims() != other.dims() || self.resolution != other.resolution {
            return Err(ShapeError::new(
                op,
                (self.width, self.height, self.resolution),
                (other.width, other.height, other.resolution),
            ));
        }
        Ok(())
    }

    pub fn union(&self, other: &Mask) -> Result<Mask, ShapeError> {
        self.zip_with(other, "union", |a, b| a || b)
    }

    pub fn intersection(&self, other: &Mask) -> Result<Mask, ShapeError> {
        self.zip_with(other, "intersection", |a, b| a && b)
    }

    pub fn complement(&self) -> Mask {
        Mask {
            cells: self.cells.iter().map(|c| !c).collect(),
            ..self.clone()
        }
    }

    fn zip_with(&self, other: &Mask, op: &'static str, f: impl Fn(bool, bool) -> bool) -> Result<Mask, ShapeError> {
        self.check_same_shape(other, op)?;
        Ok(Mask {
            cells: self.cells.iter().zip(&other.cells).map(|(&a, &b)| f(a, b)).collect(),
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_bbox_and_count() {
        let m = Mask::rect(10, 10, Resolution::Latent, 2, 3, 4, 2);
        assert_eq!(m.count(), 8);
        let b = m.bounding_box().unwrap();
        assert_eq!((b.min_x, b.min_y, b.max_x, b.max_y), (2, 3, 5, 4));
        assert!(Mask::empty(4, 4, Resolution::Image).bounding_box().is_none());
    }

    #[test]
    fn algebra_requires_matching_resolution() {
        let a = Mask::full(4, 4, Resolution::Image);
        let b = Mask::full(4, 4, Resolution::Latent);
        assert!(a.union(&b).is_err());
        assert!(a.union(&Mask::full(4, 5, Resolution::Image)).is_err());
        assert_eq!(a.complement().count(), 0);
    }
}
