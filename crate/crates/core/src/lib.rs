//! Zero-shot motion control for text-to-video diffusion.
//!
//! Prompts compile into per-character motion plans; the plans drive
//! mask-guided warps of latent features, IoU-gated cross-frame attention and
//! a DDPM/DDIM settle, and the result is scored by direction agreement of
//! tracked object centres.

pub mod blob;
pub mod bridge;
pub mod config;
pub mod diffusion;
pub mod direction;
pub mod error;
pub mod evaluator;
pub mod frame;
pub mod io;
pub mod latent;
pub mod mask;
pub mod motion_plan;
pub mod pipeline;
pub mod planner;
pub mod scene;
pub mod scheduler;
pub mod segmenter;
pub mod skeleton;
pub mod warp;

pub use config::{BackendKind, ConfigError, LlmKind, PipelineConfig};
pub use diffusion::{DiffusionSchedule, ScheduleConfig};
pub use direction::{direction_to_delta, Delta, Direction, UnknownDirection};
pub use error::ShapeError;
pub use frame::FrameImage;
pub use latent::{LatentGrid, LatentShape};
pub use mask::{BoundingBox, Mask, Resolution};
pub use motion_plan::{CharacterPlan, MotionPlan, PlanError};
pub use scheduler::{AnchorState, SliceSchedule};
pub use pipeline::{EditTarget, Generation, PipelineError, PlanSource};
pub use planner::{Lexicon, LlmProvider, PlannerError};
