//! Disentangled, mask-guided warping of latent features.
//!
//! Each moving character's features are translated within its own swept
//! region while everything else stays pinned to the first frame. The swept
//! region for a character with mask `m` and step `δ` is
//! `shift(m ∪ shift(m, −δ), δ)`: the reverse-shifted copy drags surrounding
//! background over the trace the character leaves behind.

use thiserror::Error;

use crate::direction::{Delta, Direction};
use crate::error::ShapeError;
use crate::latent::LatentGrid;
use crate::mask::Mask;
use crate::motion_plan::{CharacterPlan, MotionPlan, PlanError};

/// Name of the synthetic character that carries camera motion.
pub const CAMERA_BACKGROUND_NAME: &str = "background_scene";

/// Phrase prefix marking a segmentation target as the complement of another
/// phrase (`"everything except man"`).
pub const COMPLEMENT_PREFIX: &str = "everything except ";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WarpError {
    #[error("delta ({dx}, {dy}) does not fit a {width}x{height} grid", dx = .delta.dx, dy = .delta.dy)]
    DeltaOutOfRange {
        delta: Delta,
        width: usize,
        height: usize,
    },
    #[error("{masks} masks but {deltas} deltas")]
    CountMismatch { masks: usize, deltas: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Border policy for cells vacated by a shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fill {
    /// Replicate the nearest edge cell.
    #[default]
    Edge,
    /// Zero for latents, `false` for masks.
    Zero,
}

/// Integer translation. Output cell `(x, y)` takes input cell `(x−dx, y−dy)`.
pub trait Shift: Sized {
    fn shift(&self, delta: Delta, fill: Fill) -> Result<Self, WarpError>;
}

fn check_delta(delta: Delta, width: usize, height: usize) -> Result<(), WarpError> {
    if delta.fits(width, height) {
        Ok(())
    } else {
        Err(WarpError::DeltaOutOfRange { delta, width, height })
    }
}

#[inline]
fn source(coord: usize, offset: i32, len: usize) -> Option<usize> {
    let s = coord as i64 - offset as i64;
    (0..len as i64).contains(&s).then_some(s as usize)
}

impl Shift for LatentGrid {
    fn shift(&self, delta: Delta, fill: Fill) -> Result<Self, WarpError> {
        let (w, h) = (self.width(), self.height());
        check_delta(delta, w, h)?;
        if delta.is_zero() {
            return Ok(self.clone());
        }
        let mut out = LatentGrid::zeros(self.shape());
        for c in 0..self.channels() {
            for y in 0..h {
                let sy = source(y, delta.dy, h);
                for x in 0..w {
                    let sx = source(x, delta.dx, w);
                    let v = match (sx, sy, fill) {
                        (Some(sx), Some(sy), _) => self.get(c, sx, sy),
                        (_, _, Fill::Zero) => 0.0,
                        (_, _, Fill::Edge) => {
                            let cx = (x as i64 - delta.dx as i64).clamp(0, w as i64 - 1) as usize;
                            let cy = (y as i64 - delta.dy as i64).clamp(0, h as i64 - 1) as usize;
                            self.get(c, cx, cy)
                        }
                    };
                    out.set(c, x, y, v);
                }
            }
        }
        Ok(out)
    }
}

/// Masks always fill vacated cells with `false`, whatever `fill` says.
impl Shift for Mask {
    fn shift(&self, delta: Delta, _fill: Fill) -> Result<Self, WarpError> {
        let (w, h) = self.dims();
        check_delta(delta, w, h)?;
        Ok(Mask::from_fn(w, h, self.resolution(), |x, y| {
            match (source(x, delta.dx, w), source(y, delta.dy, h)) {
                (Some(sx), Some(sy)) => self.get(sx, sy),
                _ => false,
            }
        }))
    }
}

/// Region of the next frame written by a character's warp.
pub fn swept_region(mask: &Mask, delta: Delta) -> Result<Mask, WarpError> {
    let reverse = mask.shift(-delta, Fill::Zero)?;
    Ok(mask.union(&reverse)?.shift(delta, Fill::Zero)?)
}

/// Output of one warp step.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub latent: LatentGrid,
    pub masks: Vec<Mask>,
    /// Characters whose mask left the frame during this step.
    pub exited: Vec<usize>,
}

/// Builds frame `k` from frame `k−1`.
///
/// * Each character's swept region takes `shift(prev_latent, δᵢ)` (edge
///   replicated); characters later in the list paint over earlier ones.
/// * Unclaimed cells inside any first-frame mask keep `prev_latent`, which
///   already holds the background dragged over the original trace.
/// * Every other cell is `base_latent`.
/// * Masks move by `δᵢ` with false fill.
pub fn compose_next_frame(
    prev_latent: &LatentGrid,
    prev_masks: &[Mask],
    deltas: &[Delta],
    base_latent: &LatentGrid,
    base_masks: &[Mask],
) -> Result<Composition, WarpError> {
    if prev_masks.len() != deltas.len() {
        return Err(WarpError::CountMismatch {
            masks: prev_masks.len(),
            deltas: deltas.len(),
        });
    }
    prev_latent.check_same_shape(base_latent, "compose_next_frame")?;
    let (w, h) = (prev_latent.width(), prev_latent.height());
    for m in prev_masks.iter().chain(base_masks) {
        if m.dims() != (w, h) {
            return Err(ShapeError::new("compose_next_frame", (w, h), m.dims()).into());
        }
    }

    let mut out = base_latent.clone();
    let mut claimed = vec![false; w * h];
    let channels = prev_latent.channels();

    for (mask, &delta) in prev_masks.iter().zip(deltas) {
        let region = swept_region(mask, delta)?;
        if region.is_empty() {
            continue;
        }
        let moved = prev_latent.shift(delta, Fill::Edge)?;
        for y in 0..h {
            for x in 0..w {
                if region.get(x, y) {
                    claimed[y * w + x] = true;
                    for c in 0..channels {
                        out.set(c, x, y, moved.get(c, x, y));
                    }
                }
            }
        }
    }

    for y in 0..h {
        for x in 0..w {
            if !claimed[y * w + x] && base_masks.iter().any(|m| m.get(x, y)) {
                for c in 0..channels {
                    out.set(c, x, y, prev_latent.get(c, x, y));
                }
            }
        }
    }

    let mut masks = Vec::with_capacity(prev_masks.len());
    let mut exited = Vec::new();
    for (i, (mask, &delta)) in prev_masks.iter().zip(deltas).enumerate() {
        let next = mask.shift(delta, Fill::Zero)?;
        if !mask.is_empty() && next.is_empty() {
            exited.push(i);
        }
        masks.push(next);
    }

    Ok(Composition {
        latent: out,
        masks,
        exited,
    })
}

/// Cell-wise select: foreground where the mask is set, background elsewhere.
pub fn fuse_foreground_background(
    fg: &LatentGrid,
    bg: &LatentGrid,
    fg_mask: &Mask,
) -> Result<LatentGrid, ShapeError> {
    fg.check_same_shape(bg, "fuse_foreground_background")?;
    if fg_mask.dims() != (fg.width(), fg.height()) {
        return Err(ShapeError::new(
            "fuse_foreground_background",
            (fg.width(), fg.height()),
            fg_mask.dims(),
        ));
    }
    let mut out = bg.clone();
    for c in 0..fg.channels() {
        for y in 0..fg.height() {
            for x in 0..fg.width() {
                if fg_mask.get(x, y) {
                    out.set(c, x, y, fg.get(c, x, y));
                }
            }
        }
    }
    Ok(out)
}

/// Rewrites a plan for a camera that follows `protagonist`.
///
/// The protagonist holds still, a synthetic [`CAMERA_BACKGROUND_NAME`]
/// character covering the rest of the scene moves opposite to it, and any
/// other character keeps only its motion relative to the protagonist.
pub fn apply_camera_mode(plan: &MotionPlan, protagonist: &str) -> Result<MotionPlan, PlanError> {
    let hero = plan
        .character(protagonist)
        .ok_or_else(|| PlanError::UnknownCharacter(protagonist.to_string()))?;
    let background = CharacterPlan::new(
        CAMERA_BACKGROUND_NAME,
        format!("{COMPLEMENT_PREFIX}{}", hero.phrase),
        hero.directions.iter().map(|d| d.opposite()).collect(),
    );
    let mut characters = vec![background];
    for c in plan.characters() {
        let directions = if c.name == protagonist {
            vec![Direction::Motionless; c.directions.len()]
        } else {
            c.directions
                .iter()
                .zip(&hero.directions)
                .map(|(&own, &cam)| relative_direction(own, cam))
                .collect()
        };
        characters.push(CharacterPlan::new(c.name.clone(), c.phrase.clone(), directions));
    }
    MotionPlan::new(plan.frame_count(), characters)
}

fn relative_direction(own: Direction, camera: Direction) -> Direction {
    let (ox, oy) = own.unit();
    let (cx, cy) = camera.unit();
    let (rx, ry) = ((ox - cx).signum(), (oy - cy).signum());
    Direction::ALL
        .into_iter()
        .find(|d| d.unit() == (rx, ry))
        .expect("every sign pair is a direction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::LatentShape;
    use crate::mask::Resolution;
    use Direction::*;

    fn grid3() -> LatentGrid {
        LatentGrid::from_fn(LatentShape::new(1, 3, 3), |_, x, y| (y * 3 + x) as f64)
    }

    /// Per-cell index oracle for a shift with edge replication.
    fn shift_oracle(g: &LatentGrid, d: Delta) -> LatentGrid {
        let (w, h) = (g.width() as i64, g.height() as i64);
        LatentGrid::from_fn(g.shape(), |c, x, y| {
            let sx = (x as i64 - d.dx as i64).clamp(0, w - 1) as usize;
            let sy = (y as i64 - d.dy as i64).clamp(0, h - 1) as usize;
            g.get(c, sx, sy)
        })
    }

    #[test]
    fn zero_shift_is_identity() {
        let g = grid3();
        assert!(g.shift(Delta::ZERO, Fill::Edge).unwrap().bit_eq(&g));
    }

    #[test]
    fn unit_shift_matches_oracle() {
        let g = grid3();
        let got = g.shift(Delta::new(1, 0), Fill::Edge).unwrap();
        assert_eq!(got.values(), &[0.0, 0.0, 1.0, 3.0, 3.0, 4.0, 6.0, 6.0, 7.0]);
        assert_eq!(got, shift_oracle(&g, Delta::new(1, 0)));
        let zero = g.shift(Delta::new(0, -1), Fill::Zero).unwrap();
        assert_eq!(zero.values(), &[3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn mask_shifted_out_is_empty() {
        let m = Mask::rect(3, 3, Resolution::Latent, 0, 0, 1, 1);
        assert!(m.shift(Delta::new(-1, 0), Fill::Edge).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_delta_is_rejected() {
        let g = grid3();
        assert!(matches!(
            g.shift(Delta::new(3, 0), Fill::Edge),
            Err(WarpError::DeltaOutOfRange { .. })
        ));
        assert!(g.shift(Delta::new(-2, 2), Fill::Edge).is_ok());
    }

    #[test]
    fn zero_delta_composition_keeps_masks() {
        let shape = LatentShape::new(2, 8, 8);
        let base = LatentGrid::filled(shape, 1.0);
        let prev = LatentGrid::from_fn(shape, |c, x, y| (c + x * y) as f64);
        let m = Mask::rect(8, 8, Resolution::Latent, 2, 2, 3, 3);
        let out = compose_next_frame(&prev, &[m.clone()], &[Delta::ZERO], &base, &[m.clone()]).unwrap();
        assert_eq!(out.masks, vec![m.clone()]);
        for y in 0..8 {
            for x in 0..8 {
                let expect = if m.get(x, y) { &prev } else { &base };
                assert_eq!(out.latent.cell(x, y), expect.cell(x, y));
            }
        }
        assert!(out.exited.is_empty());
    }

    #[test]
    fn block_moves_and_trace_is_inpainted() {
        // Uniform background of 1.0 with a 4x4 block of 9.0 at (4..8, 4..8).
        let shape = LatentShape::new(1, 16, 16);
        let m = Mask::rect(16, 16, Resolution::Latent, 4, 4, 4, 4);
        let base = LatentGrid::from_fn(shape, |_, x, y| if m.get(x, y) { 9.0 } else { 1.0 });
        let out = compose_next_frame(&base, &[m.clone()], &[Delta::new(4, 0)], &base, &[m.clone()]).unwrap();
        let moved = Mask::rect(16, 16, Resolution::Latent, 8, 4, 4, 4);
        assert_eq!(out.masks[0], moved);
        for y in 0..16 {
            for x in 0..16 {
                let expect = if moved.get(x, y) { 9.0 } else { 1.0 };
                assert_eq!(out.latent.get(0, x, y), expect, "cell ({x},{y})");
            }
        }
        // A second step keeps the original trace hidden.
        let out2 =
            compose_next_frame(&out.latent, &out.masks, &[Delta::new(4, 0)], &base, &[m.clone()]).unwrap();
        for x in 4..8 {
            assert_eq!(out2.latent.get(0, x, 5), 1.0);
        }
        assert_eq!(out2.latent.get(0, 12, 5), 9.0);
    }

    #[test]
    fn exit_is_reported() {
        let shape = LatentShape::new(1, 4, 4);
        let base = LatentGrid::zeros(shape);
        let m = Mask::rect(4, 4, Resolution::Latent, 3, 0, 1, 1);
        let out = compose_next_frame(&base, &[m.clone()], &[Delta::new(1, 0)], &base, &[m]).unwrap();
        assert_eq!(out.exited, vec![0]);
        assert!(out.masks[0].is_empty());
    }

    #[test]
    fn compose_validates_inputs() {
        let shape = LatentShape::new(1, 4, 4);
        let g = LatentGrid::zeros(shape);
        let m = Mask::empty(4, 4, Resolution::Latent);
        assert!(matches!(
            compose_next_frame(&g, &[m.clone()], &[], &g, &[]),
            Err(WarpError::CountMismatch { .. })
        ));
        let wrong = Mask::empty(5, 4, Resolution::Latent);
        assert!(compose_next_frame(&g, &[wrong], &[Delta::ZERO], &g, &[]).is_err());
    }

    #[test]
    fn fusion_selects_by_mask() {
        let shape = LatentShape::new(2, 2, 2);
        let fg = LatentGrid::filled(shape, 5.0);
        let bg = LatentGrid::filled(shape, -1.0);
        let full = Mask::full(2, 2, Resolution::Latent);
        assert!(fuse_foreground_background(&fg, &bg, &full).unwrap().bit_eq(&fg));
        assert!(fuse_foreground_background(&fg, &bg, &full.complement()).unwrap().bit_eq(&bg));
        assert!(fuse_foreground_background(&fg, &bg, &Mask::full(3, 2, Resolution::Latent)).is_err());
    }

    fn plan_of(dirs: Vec<Direction>) -> MotionPlan {
        MotionPlan::new(dirs.len() + 1, vec![CharacterPlan::new("car", "red car", dirs)]).unwrap()
    }

    #[test]
    fn camera_mode_inverts_protagonist() {
        let out = apply_camera_mode(&plan_of(vec![Right; 7]), "car").unwrap();
        let bg = out.character(CAMERA_BACKGROUND_NAME).unwrap();
        assert_eq!(bg.directions, vec![Left; 7]);
        assert_eq!(bg.phrase, "everything except red car");
        assert_eq!(out.character("car").unwrap().directions, vec![Motionless; 7]);
        assert_eq!(out.characters()[0].name, CAMERA_BACKGROUND_NAME);

        let still = apply_camera_mode(&plan_of(vec![Motionless; 3]), "car").unwrap();
        assert_eq!(still.character(CAMERA_BACKGROUND_NAME).unwrap().directions, vec![Motionless; 3]);

        let mixed = apply_camera_mode(&plan_of(vec![Up, Right]), "car").unwrap();
        assert_eq!(mixed.character(CAMERA_BACKGROUND_NAME).unwrap().directions, vec![Down, Left]);

        assert_eq!(
            apply_camera_mode(&plan_of(vec![Up]), "boat").unwrap_err(),
            PlanError::UnknownCharacter("boat".into())
        );
    }

    #[test]
    fn camera_mode_keeps_relative_motion_of_others() {
        let plan = MotionPlan::new(
            3,
            vec![
                CharacterPlan::new("car", "car", vec![Right, Right]),
                CharacterPlan::new("dog", "dog", vec![Right, Motionless]),
            ],
        )
        .unwrap();
        let out = apply_camera_mode(&plan, "car").unwrap();
        assert_eq!(out.character("dog").unwrap().directions, vec![Motionless, Left]);
    }
}
