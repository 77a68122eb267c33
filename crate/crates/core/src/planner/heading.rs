//! First-frame heading priors.

use std::collections::HashMap;

use thiserror::Error;

use crate::diffusion::BackendError;
use crate::direction::Direction;
use crate::frame::FrameImage;
use crate::scene::Scene;
use crate::segmenter::{segment, SegmentError, SegmentationRequest, Segmenter, DEFAULT_CONFIDENCE};

use super::HeadingHint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeadingError {
    #[error("no heading found for `{0}` in the first frame")]
    NotFound(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Answers "which way is this character facing?" for a frame.
pub trait HeadingProvider: Send + Sync {
    fn heading(&self, frame: &FrameImage, character: &str) -> Result<Direction, HeadingError>;
}

pub fn resolve_heading(
    first_frame: &FrameImage,
    character: &str,
    provider: &dyn HeadingProvider,
) -> Result<HeadingHint, HeadingError> {
    let heading = provider.heading(first_frame, character)?;
    HeadingHint::new(character, heading).map_err(|_| HeadingError::NotFound(character.to_string()))
}

/// Fixed answers. With a scene attached, characters the scene does not
/// contain are reported as not found.
#[derive(Debug, Clone, Default)]
pub struct StubHeadingProvider {
    default: Option<Direction>,
    per_character: HashMap<String, Direction>,
    scene: Option<Scene>,
}

impl StubHeadingProvider {
    pub fn new(default: Direction) -> Self {
        StubHeadingProvider {
            default: Some(default),
            ..Default::default()
        }
    }

    pub fn with(mut self, character: impl Into<String>, heading: Direction) -> Self {
        self.per_character.insert(character.into(), heading);
        self
    }

    pub fn with_scene(mut self, scene: Scene) -> Self {
        self.scene = Some(scene);
        self
    }
}

impl HeadingProvider for StubHeadingProvider {
    fn heading(&self, _frame: &FrameImage, character: &str) -> Result<Direction, HeadingError> {
        let phrase = character.replace('_', " ");
        if let Some(scene) = &self.scene {
            if scene.find(&phrase).is_none() {
                return Err(HeadingError::NotFound(character.to_string()));
            }
        }
        self.per_character
            .get(character)
            .copied()
            .or(self.default)
            .ok_or_else(|| HeadingError::NotFound(character.to_string()))
    }
}

/// Reads the heading off the silhouette: a sprite that tapers towards its
/// front has its centroid behind the bounding-box centre, so the heading
/// points from the centroid to the box centre. Symmetric shapes have no
/// heading.
#[derive(Debug, Clone)]
pub struct ShapeHeadingProvider<S> {
    segmenter: S,
    confidence: f64,
}

impl<S: Segmenter> ShapeHeadingProvider<S> {
    pub fn new(segmenter: S) -> Self {
        ShapeHeadingProvider {
            segmenter,
            confidence: DEFAULT_CONFIDENCE,
        }
    }
}

/// Offsets below this fraction of the box size count as symmetric.
const ASYMMETRY: f64 = 0.05;

impl<S: Segmenter> HeadingProvider for ShapeHeadingProvider<S> {
    fn heading(&self, frame: &FrameImage, character: &str) -> Result<Direction, HeadingError> {
        let phrase = character.replace('_', " ");
        let req = SegmentationRequest {
            confidence: self.confidence,
            ..SegmentationRequest::new(frame, &phrase)
        };
        let mask = match segment(&req, &self.segmenter) {
            Ok(m) => m,
            Err(SegmentError::Backend(e)) => return Err(HeadingError::Backend(e)),
            Err(_) => return Err(HeadingError::NotFound(character.to_string())),
        };
        let bbox = mask.bounding_box().ok_or_else(|| HeadingError::NotFound(character.to_string()))?;
        let (cx, cy) = bbox.center();
        let (mut sx, mut sy) = (0.0, 0.0);
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if mask.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                }
            }
        }
        let n = mask.count() as f64;
        let (vx, vy) = (cx - sx / n, cy - sy / n);
        let extent = (bbox.max_x - bbox.min_x + 1).max(bbox.max_y - bbox.min_y + 1) as f64;
        if vx.hypot(vy) < ASYMMETRY * extent {
            return Err(HeadingError::NotFound(character.to_string()));
        }
        Ok(quantize(vx, vy))
    }
}

/// Nearest of the eight moving directions (y grows downwards).
fn quantize(vx: f64, vy: f64) -> Direction {
    let t = (22.5f64).to_radians().tan();
    let sx = if vx.abs() > t * vy.abs() { vx.signum() as i32 } else { 0 };
    let sy = if vy.abs() > t * vx.abs() { vy.signum() as i32 } else { 0 };
    Direction::MOVING
        .into_iter()
        .find(|d| d.unit() == (sx, sy))
        .unwrap_or(Direction::Motionless)
}
