//! The denoiser/codec interface and the oracle denoiser.

use thiserror::Error;

use super::noise::{NoisePurpose, NoiseSource};
use super::schedule::DiffusionSchedule;
use crate::error::ShapeError;
use crate::frame::FrameImage;
use crate::latent::{LatentGrid, LatentShape};
use crate::scene::SceneError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend endpoint {endpoint} unreachable: {cause}")]
    Unreachable { endpoint: String, cause: String },
    #[error("backend endpoint {endpoint} answered {status}: {body}")]
    Status { endpoint: String, status: u16, body: String },
    #[error("backend endpoint {endpoint} sent a malformed reply: {detail}")]
    Protocol { endpoint: String, detail: String },
    #[error("backend does not support {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Per-call inputs besides the noisy latent and timestep.
#[derive(Debug, Clone, Copy)]
pub struct DenoiseContext<'a> {
    pub frame: usize,
    pub condition: &'a str,
    /// Anchor-frame latent at the same timestep; `None` outside the motion
    /// stage.
    pub anchor: Option<&'a LatentGrid>,
    pub schedule: &'a DiffusionSchedule,
}

/// First frame of a video: the decoded image, its clean latent and the
/// initial noise it was sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstFrame {
    pub image: FrameImage,
    pub latent: LatentGrid,
    pub initial_noise: LatentGrid,
}

pub trait DenoiserBackend: Send + Sync {
    /// Latent shape for a square image of `image_size` pixels.
    fn latent_shape(&self, image_size: u32) -> LatentShape;

    /// Noise prediction `ε_θ(x_t, t, condition)`.
    fn predict_noise(&self, x_t: &LatentGrid, t: usize, ctx: &DenoiseContext<'_>) -> Result<LatentGrid, BackendError>;

    fn encode(&self, frame: &FrameImage) -> Result<LatentGrid, BackendError>;

    fn decode(&self, latent: &LatentGrid) -> Result<FrameImage, BackendError>;

    /// Hook for backends that generate the first frame remotely. Returning
    /// `None` selects the local DDIM path.
    fn remote_first_frame(
        &self,
        _prompt: &str,
        _seed: u64,
        _image_size: u32,
    ) -> Option<Result<FirstFrame, BackendError>> {
        None
    }
}

/// Replays the exact noise that [`forward_diffuse`](super::forward_diffuse)
/// injected at `inject_t`, whatever timestep it is asked about. Encode and
/// decode are unsupported.
#[derive(Debug, Clone, Copy)]
pub struct OracleDenoiser {
    pub noise: NoiseSource,
    pub inject_t: usize,
}

impl DenoiserBackend for OracleDenoiser {
    fn latent_shape(&self, image_size: u32) -> LatentShape {
        LatentShape::new(4, image_size as usize / 8, image_size as usize / 8)
    }

    fn predict_noise(&self, x_t: &LatentGrid, _t: usize, ctx: &DenoiseContext<'_>) -> Result<LatentGrid, BackendError> {
        Ok(self.noise.gaussian(NoisePurpose::Forward, ctx.frame, self.inject_t, x_t.shape()))
    }

    fn encode(&self, _frame: &FrameImage) -> Result<LatentGrid, BackendError> {
        Err(BackendError::Unsupported("encode"))
    }

    fn decode(&self, _latent: &LatentGrid) -> Result<FrameImage, BackendError> {
        Err(BackendError::Unsupported("decode"))
    }
}
