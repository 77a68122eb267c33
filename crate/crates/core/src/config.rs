//! Run configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffusion::schedule::{ScheduleConfig, ScheduleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("frame count must be at least 2, got {0}")]
    FrameCount(usize),
    #[error("step sigma must be at least 1")]
    Sigma,
    #[error("gamma must lie in (0, 1], got {0}")]
    Gamma(f64),
    #[error("segmentation confidence must lie in (0, 1], got {0}")]
    Confidence(f64),
    #[error("image size {size} is not a positive multiple of the latent factor {factor}")]
    ImageSize { size: u32, factor: u32 },
    #[error("bridge backend selected but no bridge URL given")]
    MissingBridgeUrl,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Toy,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmKind {
    Replay,
    Http,
    Fallback,
}

/// Everything that determines a run. Serialised verbatim into the report so
/// a run can be reproduced from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub frame_count: usize,
    pub image_size: u32,
    pub latent_factor: u32,
    /// Cells per frame moved by one direction step.
    pub sigma: u32,
    /// IoU threshold gating anchor updates.
    pub gamma: f64,
    pub seed: u64,
    pub backend: BackendKind,
    pub bridge_url: Option<String>,
    pub llm: LlmKind,
    pub segmentation_confidence: f64,
    pub schedule: ScheduleConfig,
    /// Protagonist followed by the camera, if any.
    pub camera: Option<String>,
    /// Evolving-event prompts, one per slice.
    pub slices: Option<Vec<String>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            frame_count: 8,
            image_size: 512,
            latent_factor: 8,
            sigma: 4,
            gamma: 0.6,
            seed: 0,
            backend: BackendKind::Toy,
            bridge_url: None,
            llm: LlmKind::Fallback,
            segmentation_confidence: 0.3,
            schedule: ScheduleConfig::default(),
            camera: None,
            slices: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.frame_count < 2 {
            return Err(ConfigError::FrameCount(self.frame_count));
        }
        if self.sigma < 1 {
            return Err(ConfigError::Sigma);
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ConfigError::Gamma(self.gamma));
        }
        if !(self.segmentation_confidence > 0.0 && self.segmentation_confidence <= 1.0) {
            return Err(ConfigError::Confidence(self.segmentation_confidence));
        }
        if self.latent_factor == 0 || self.image_size == 0 || self.image_size % self.latent_factor != 0 {
            return Err(ConfigError::ImageSize {
                size: self.image_size,
                factor: self.latent_factor,
            });
        }
        if self.backend == BackendKind::Bridge && self.bridge_url.is_none() {
            return Err(ConfigError::MissingBridgeUrl);
        }
        self.schedule.build()?;
        Ok(())
    }

    pub fn latent_size(&self) -> usize {
        (self.image_size / self.latent_factor) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.latent_size(), 64);
        assert_eq!(cfg.frame_count, 8);
        assert_eq!(cfg.segmentation_confidence, 0.3);
        assert_eq!(cfg.gamma, 0.6);
    }

    #[test]
    fn invariants_enforced() {
        let bad = |f: fn(&mut PipelineConfig)| {
            let mut c = PipelineConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.frame_count = 1));
        assert!(bad(|c| c.sigma = 0));
        assert!(bad(|c| c.gamma = 0.0));
        assert!(bad(|c| c.gamma = 1.5));
        assert!(bad(|c| c.segmentation_confidence = 0.0));
        assert!(bad(|c| c.image_size = 500));
        assert!(bad(|c| c.backend = BackendKind::Bridge));
        assert!(!bad(|c| c.gamma = 1.0));
    }
}
