//! Motion-aware attention: anchored cross-frame attention, IoU-gated anchor
//! updates and evolving-event slices.

pub mod anchor;
pub mod attention;
pub mod slices;

pub use anchor::{anchor_schedule, gate_iou, schedule_entries, update_anchor, update_count, AnchorEntry, AnchorError, AnchorState};
pub use attention::{attend_row, attention_weights, cross_frame_attention, softmax_weights};
pub use slices::{slice_schedule, Slice, SliceError, SliceSchedule};
