//! Colour-key segmentation against a compiled toy scene.

use image::{GrayImage, Luma};
use imageproc::region_labelling::{connected_components, Connectivity};

use super::{SegmentError, SegmentationRequest, Segmenter};
use crate::mask::{Mask, Resolution};
use crate::scene::{color_distance, Scene};
use crate::warp::COMPLEMENT_PREFIX;

/// RGB distance at which a pixel's score reaches zero.
pub const KEY_RADIUS: f64 = 96.0;

/// Finds the entity a phrase names in the scene, then keys its colour:
/// each pixel scores `1 − distance / KEY_RADIUS`, pixels at or above the
/// confidence form connected regions, and the region with the best mean
/// score wins. Phrases of the form `"everything except X"` return the
/// complement of X's mask.
#[derive(Debug, Clone)]
pub struct ToySegmenter {
    scene: Scene,
}

impl ToySegmenter {
    pub fn new(scene: Scene) -> Self {
        ToySegmenter { scene }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    fn key(&self, req: &SegmentationRequest<'_>, color: [u8; 3]) -> Mask {
        let frame = req.frame.as_rgb();
        let (w, h) = frame.dimensions();
        let score = |p: &image::Rgb<u8>| 1.0 - color_distance(p.0, color) / KEY_RADIUS;
        let candidates = GrayImage::from_fn(w, h, |x, y| {
            Luma([if score(frame.get_pixel(x, y)) >= req.confidence { 255 } else { 0 }])
        });
        let labels = connected_components(&candidates, Connectivity::Four, Luma([0u8]));
        let mut stats: Vec<(f64, usize)> = Vec::new();
        for (x, y, l) in labels.enumerate_pixels() {
            let l = l.0[0] as usize;
            if l == 0 {
                continue;
            }
            if stats.len() < l {
                stats.resize(l, (0.0, 0));
            }
            stats[l - 1].0 += score(frame.get_pixel(x, y));
            stats[l - 1].1 += 1;
        }
        let best = stats
            .iter()
            .enumerate()
            .filter(|(_, s)| s.1 > 0)
            .max_by(|(ia, a), (ib, b)| {
                let (ma, mb) = (a.0 / a.1 as f64, b.0 / b.1 as f64);
                ma.total_cmp(&mb).then(a.1.cmp(&b.1)).then(ib.cmp(ia))
            })
            .map(|(i, _)| i as u32 + 1);
        Mask::from_fn(w as usize, h as usize, Resolution::Image, |x, y| {
            Some(labels.get_pixel(x as u32, y as u32).0[0]) == best
        })
    }
}

impl Segmenter for ToySegmenter {
    fn segment(&self, req: &SegmentationRequest<'_>) -> Result<Mask, SegmentError> {
        let (w, h) = (req.frame.width() as usize, req.frame.height() as usize);
        if let Some(rest) = req.phrase.strip_prefix(COMPLEMENT_PREFIX) {
            let inner = SegmentationRequest { phrase: rest, ..req.clone() };
            return Ok(match self.segment(&inner) {
                Ok(m) if !m.is_empty() => m.complement(),
                _ => Mask::full(w, h, Resolution::Image),
            });
        }
        Ok(match self.scene.find(req.phrase) {
            Some(entity) => self.key(req, entity.color),
            None => Mask::empty(w, h, Resolution::Image),
        })
    }
}
