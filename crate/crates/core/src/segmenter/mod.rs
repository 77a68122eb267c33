//! First-frame segmentation and mask algebra.

pub mod toy;

use thiserror::Error;

use crate::diffusion::BackendError;
use crate::error::ShapeError;
use crate::frame::FrameImage;
use crate::mask::{Mask, Resolution};

pub use toy::ToySegmenter;

/// Confidence used when none is configured.
pub const DEFAULT_CONFIDENCE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("segmentation phrase must not be empty")]
    EmptyPhrase,
    #[error("segmentation confidence must lie in (0, 1], got {0}")]
    Confidence(f64),
    #[error("no region for {phrase:?} reaches the confidence threshold")]
    NoRegion { phrase: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("mask is empty")]
pub struct EmptyMask;

#[derive(Debug, Clone)]
pub struct SegmentationRequest<'a> {
    pub frame: &'a FrameImage,
    pub phrase: &'a str,
    pub confidence: f64,
}

impl<'a> SegmentationRequest<'a> {
    pub fn new(frame: &'a FrameImage, phrase: &'a str) -> Self {
        SegmentationRequest {
            frame,
            phrase,
            confidence: DEFAULT_CONFIDENCE,
        }
    }
}

pub trait Segmenter: Send + Sync {
    /// Image-resolution mask of the highest-confidence instance of the
    /// phrase. Implementations may assume the request was validated.
    fn segment(&self, req: &SegmentationRequest<'_>) -> Result<Mask, SegmentError>;
}

/// Validates the request and asks `backend` for the mask.
pub fn segment(req: &SegmentationRequest<'_>, backend: &dyn Segmenter) -> Result<Mask, SegmentError> {
    if req.phrase.trim().is_empty() {
        return Err(SegmentError::EmptyPhrase);
    }
    if !(req.confidence > 0.0 && req.confidence <= 1.0) {
        return Err(SegmentError::Confidence(req.confidence));
    }
    let mask = backend.segment(req)?;
    if mask.is_empty() {
        return Err(SegmentError::NoRegion {
            phrase: req.phrase.to_string(),
        });
    }
    Ok(mask)
}

/// `|a ∩ b| / |a ∪ b|`, with two empty masks scoring 1.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64, ShapeError> {
    a.check_same_shape(b, "iou")?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.cells().iter().zip(b.cells()) {
        inter += usize::from(p && q);
        union += usize::from(p || q);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Midpoint of the tight bounding box, in cells.
pub fn mask_center(m: &Mask) -> Result<(f64, f64), EmptyMask> {
    m.bounding_box().map(|b| b.center()).ok_or(EmptyMask)
}

/// Block-reduces an image mask: a latent cell is set when at least half of
/// its `factor × factor` block is set.
pub fn to_latent_resolution(m: &Mask, factor: usize) -> Result<Mask, ShapeError> {
    let (w, h) = m.dims();
    if factor == 0 || w % factor != 0 || h % factor != 0 {
        return Err(ShapeError::new("to_latent_resolution", (w, h), factor));
    }
    let area = factor * factor;
    Ok(Mask::from_fn(w / factor, h / factor, Resolution::Latent, |lx, ly| {
        let mut count = 0;
        for y in ly * factor..(ly + 1) * factor {
            for x in lx * factor..(lx + 1) * factor {
                count += usize::from(m.get(x, y));
            }
        }
        2 * count >= area
    }))
}

/// Nearest-neighbour upscale of a latent mask.
pub fn to_image_resolution(m: &Mask, factor: usize) -> Mask {
    Mask::from_fn(m.width() * factor, m.height() * factor, Resolution::Image, |x, y| {
        m.get(x / factor, y / factor)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direction::Delta;
    use crate::warp::{Fill, Shift};
    use proptest::prelude::*;

    fn lat(w: usize, h: usize, x: usize, y: usize, rw: usize, rh: usize) -> Mask {
        Mask::rect(w, h, Resolution::Latent, x, y, rw, rh)
    }

    #[test]
    fn iou_examples() {
        let a = lat(8, 8, 1, 1, 3, 3);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &lat(8, 8, 5, 5, 2, 2)).unwrap(), 0.0);
        let offset = iou(&lat(8, 8, 0, 0, 2, 2), &lat(8, 8, 1, 1, 2, 2)).unwrap();
        assert!((offset - 1.0 / 7.0).abs() < 1e-12);
        let e = Mask::empty(8, 8, Resolution::Latent);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
        assert!(iou(&a, &Mask::empty(8, 8, Resolution::Image)).is_err());
    }

    #[test]
    fn center_examples() {
        assert_eq!(mask_center(&lat(10, 10, 2, 2, 5, 3)).unwrap(), (4.0, 3.0));
        assert_eq!(mask_center(&lat(10, 10, 5, 7, 1, 1)).unwrap(), (5.0, 7.0));
        let l = lat(10, 10, 0, 0, 1, 4).union(&lat(10, 10, 0, 3, 4, 1)).unwrap();
        assert_eq!(mask_center(&l).unwrap(), (1.5, 1.5));
        assert_eq!(mask_center(&Mask::empty(3, 3, Resolution::Latent)), Err(EmptyMask));
    }

    #[test]
    fn downscale_examples() {
        let full = Mask::full(64, 64, Resolution::Image);
        assert_eq!(to_latent_resolution(&full, 8).unwrap(), Mask::full(8, 8, Resolution::Latent));
        let empty = Mask::empty(64, 64, Resolution::Image);
        assert!(to_latent_resolution(&empty, 8).unwrap().is_empty());
        let block = Mask::rect(64, 64, Resolution::Image, 0, 0, 8, 8);
        let down = to_latent_resolution(&block, 8).unwrap();
        assert_eq!(down.count(), 1);
        assert!(down.get(0, 0));
        // Exactly half a block rounds up.
        let half = Mask::rect(16, 16, Resolution::Image, 0, 0, 8, 4);
        assert!(to_latent_resolution(&half, 8).unwrap().get(0, 0));
        assert!(to_latent_resolution(&Mask::full(10, 8, Resolution::Image), 8).is_err());
        assert_eq!(to_latent_resolution(&to_image_resolution(&down, 8), 8).unwrap(), down);
    }

    #[test]
    fn segment_validates() {
        struct Never;
        impl Segmenter for Never {
            fn segment(&self, req: &SegmentationRequest<'_>) -> Result<Mask, SegmentError> {
                Ok(Mask::empty(req.frame.width() as usize, req.frame.height() as usize, Resolution::Image))
            }
        }
        let f = FrameImage::new(8, 8, [0, 0, 0]);
        let mut req = SegmentationRequest::new(&f, "cat");
        assert!(matches!(segment(&req, &Never), Err(SegmentError::NoRegion { .. })));
        req.confidence = 0.0;
        assert!(matches!(segment(&req, &Never), Err(SegmentError::Confidence(_))));
        req.phrase = " ";
        assert!(matches!(segment(&req, &Never), Err(SegmentError::EmptyPhrase)));
    }

    fn arb_mask() -> impl Strategy<Value = Mask> {
        proptest::collection::vec(any::<bool>(), 64).prop_map(|c| Mask::from_cells(8, 8, Resolution::Latent, c))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_one_iff_equal(a in arb_mask(), b in arb_mask()) {
            let ab = iou(&a, &b).unwrap();
            prop_assert_eq!(ab, iou(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            if !a.is_empty() || !b.is_empty() {
                prop_assert_eq!(ab == 1.0, a == b);
            }
        }

        #[test]
        fn center_translates(x in 0usize..10, y in 0usize..10, w in 1usize..6, h in 1usize..6, dx in -4i32..5, dy in -4i32..5) {
            let m = Mask::rect(24, 24, Resolution::Latent, x + 4, y + 4, w, h);
            let moved = m.shift(Delta::new(dx, dy), Fill::Zero).unwrap();
            let (cx, cy) = mask_center(&m).unwrap();
            prop_assert_eq!(mask_center(&moved).unwrap(), (cx + dx as f64, cy + dy as f64));
        }

        #[test]
        fn downscale_commutes_with_block_shifts(cells in proptest::collection::vec(any::<bool>(), 16 * 16), bx in -1i32..2, by in -1i32..2) {
            let m = Mask::from_cells(16, 16, Resolution::Image, cells);
            // Clear the border blocks so shifting by one block loses nothing.
            let inner = Mask::from_fn(16, 16, Resolution::Image, |x, y| m.get(x, y) && (4..12).contains(&x) && (4..12).contains(&y));
            let d = Delta::new(4 * bx, 4 * by);
            let lhs = to_latent_resolution(&inner.shift(d, Fill::Zero).unwrap(), 4).unwrap();
            let rhs = to_latent_resolution(&inner, 4).unwrap().shift(Delta::new(bx, by), Fill::Zero).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
