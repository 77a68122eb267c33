//! IoU-gated anchor-frame updates.

use serde::Serialize;
use thiserror::Error;

use crate::error::ShapeError;
use crate::mask::Mask;
use crate::scheduler::slices::SliceSchedule;
use crate::segmenter::iou;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnchorError {
    #[error("frame {k} does not come after anchor {a}")]
    NotAfterAnchor { k: usize, a: usize },
    #[error("{got} masks for frame {k}, expected {expected}")]
    MaskCount { k: usize, got: usize, expected: usize },
    #[error("mask sequence covers {got} frames, slices cover {expected}")]
    FrameCount { got: usize, expected: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Current anchor frame and the character masks it had.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorState {
    pub a: usize,
    pub anchor_masks: Vec<Mask>,
}

impl AnchorState {
    pub fn new(a: usize, anchor_masks: Vec<Mask>) -> Self {
        AnchorState { a, anchor_masks }
    }
}

/// Smallest per-character IoU between two mask sets; 1 with no characters.
pub fn gate_iou(anchor: &[Mask], current: &[Mask]) -> Result<f64, ShapeError> {
    let mut min: f64 = 1.0;
    for (a, m) in anchor.iter().zip(current) {
        min = min.min(iou(a, m)?);
    }
    Ok(min)
}

/// Advances the anchor for frame `k`. When the most-moved character's IoU
/// against the anchor drops below `gamma`, the anchor moves to `k − 1` and
/// snapshots that frame's masks.
pub fn update_anchor(
    state: &AnchorState,
    k: usize,
    masks_k: &[Mask],
    masks_prev: &[Mask],
    gamma: f64,
) -> Result<AnchorState, AnchorError> {
    if k <= state.a {
        return Err(AnchorError::NotAfterAnchor { k, a: state.a });
    }
    for (got, frame) in [(masks_k.len(), k), (masks_prev.len(), k - 1)] {
        if got != state.anchor_masks.len() {
            return Err(AnchorError::MaskCount {
                k: frame,
                got,
                expected: state.anchor_masks.len(),
            });
        }
    }
    if gate_iou(&state.anchor_masks, masks_k)? < gamma {
        Ok(AnchorState::new(k - 1, masks_prev.to_vec()))
    } else {
        Ok(state.clone())
    }
}

/// One report row: frame `frame` attends to frame `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnchorEntry {
    pub frame: usize,
    pub anchor: usize,
}

/// Folds [`update_anchor`] over every frame. `masks[k]` holds the character
/// masks of frame `k`. Each slice starts anchored on its own first frame.
pub fn anchor_schedule(masks: &[Vec<Mask>], gamma: f64, slices: &SliceSchedule) -> Result<Vec<usize>, AnchorError> {
    if masks.len() != slices.frame_count() {
        return Err(AnchorError::FrameCount {
            got: masks.len(),
            expected: slices.frame_count(),
        });
    }
    let mut anchors = vec![0; masks.len()];
    for slice in slices.slices() {
        let mut state = AnchorState::new(slice.start, masks[slice.start].clone());
        anchors[slice.start] = slice.start;
        for k in slice.start + 1..slice.end {
            state = update_anchor(&state, k, &masks[k], &masks[k - 1], gamma)?;
            anchors[k] = state.a;
        }
    }
    Ok(anchors)
}

pub fn schedule_entries(anchors: &[usize]) -> Vec<AnchorEntry> {
    anchors
        .iter()
        .enumerate()
        .map(|(frame, &anchor)| AnchorEntry { frame, anchor })
        .collect()
}

/// Number of frames whose anchor differs from the previous frame's anchor
/// inside the same slice.
pub fn update_count(anchors: &[usize], slices: &SliceSchedule) -> usize {
    slices
        .slices()
        .iter()
        .map(|s| (s.start + 1..s.end).filter(|&k| anchors[k] != anchors[k - 1]).count())
        .sum()
}
