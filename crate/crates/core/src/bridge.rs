//! HTTP client for the model bridge service.
//!
//! | endpoint            | request (JSON)                                          | reply                        |
//! |---------------------|---------------------------------------------------------|------------------------------|
//! | `GET /health`       |                                                         | JSON schedule metadata       |
//! | `POST /first_frame` | `{prompt, seed, size}`                                  | JSON `{image, latent, initial_noise}` |
//! | `POST /denoise`     | `{latent, t, condition, frame, anchor}`                 | `application/octet-stream` blob |
//! | `POST /segment`     | `{image, phrase, confidence}`                           | `image/png` mask             |
//! | `POST /heading`     | `{image, character}`                                    | JSON `{direction}`, 404 if unknown |
//! | `POST /encode`      | `{image}`                                               | blob                         |
//! | `POST /decode`      | `{latent}`                                              | `image/png`                  |
//!
//! Images travel as base64 PNG and latents as base64 `f32le` blobs inside
//! JSON bodies.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::blob::{decode_blob, encode_blob, Dtype};
use crate::diffusion::{BackendError, DenoiseContext, DenoiserBackend, FirstFrame, ScheduleConfig};
use crate::direction::Direction;
use crate::frame::FrameImage;
use crate::io::mask_from_png;
use crate::latent::{LatentGrid, LatentShape};
use crate::mask::{Mask, Resolution};
use crate::planner::{HeadingError, HeadingProvider};
use crate::segmenter::{SegmentError, SegmentationRequest, Segmenter};

pub const CONTENT_JSON: &str = "application/json";
pub const CONTENT_PNG: &str = "image/png";
pub const CONTENT_BLOB: &str = "application/octet-stream";

/// `GET /health` reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    #[serde(rename = "T")]
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub latent_channels: usize,
    pub latent_factor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstFrameRequest {
    pub prompt: String,
    pub seed: u64,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstFrameReply {
    pub image: String,
    pub latent: String,
    pub initial_noise: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseRequest {
    pub latent: String,
    pub t: usize,
    pub condition: String,
    pub frame: usize,
    pub anchor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub image: String,
    pub phrase: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadingRequest {
    pub image: String,
    pub character: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadingReply {
    pub direction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRequest {
    pub latent: String,
}

pub fn latent_to_b64(latent: &LatentGrid) -> String {
    B64.encode(encode_blob(latent, Dtype::F32Le))
}

fn png_to_b64(frame: &FrameImage) -> Result<String, BackendError> {
    let png = frame.to_png().map_err(|e| BackendError::Protocol {
        endpoint: "local PNG encoder".into(),
        detail: e.to_string(),
    })?;
    Ok(B64.encode(png))
}

/// Talks to a running bridge. Construction probes `/health`, so an absent
/// service fails early.
#[derive(Debug, Clone)]
pub struct BridgeClient {
    base: String,
    agent: ureq::Agent,
    health: Health,
}

struct Reply {
    status: u16,
    content_type: String,
    body: Vec<u8>,
}

impl BridgeClient {
    pub fn connect(base_url: &str) -> Result<BridgeClient, BackendError> {
        Self::connect_with_timeout(base_url, Duration::from_secs(120))
    }

    pub fn connect_with_timeout(base_url: &str, timeout: Duration) -> Result<BridgeClient, BackendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut client = BridgeClient {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
            health: Health {
                steps: 0,
                beta_start: 0.0,
                beta_end: 0.0,
                latent_channels: 0,
                latent_factor: 0,
            },
        };
        let reply = client.call("/health", None)?;
        client.expect(&reply, "/health", CONTENT_JSON)?;
        client.health = client.json(&reply, "/health")?;
        if client.health.latent_factor == 0 || client.health.latent_channels == 0 {
            return Err(BackendError::Protocol {
                endpoint: client.url("/health"),
                detail: "latent_factor and latent_channels must be positive".into(),
            });
        }
        Ok(client)
    }

    pub fn health(&self) -> &Health {
        &self.health
    }

    /// Noise predictions are only meaningful under the schedule the bridge
    /// was trained with, so `T` and the β endpoints must agree.
    pub fn check_schedule(&self, cfg: &ScheduleConfig) -> Result<(), BackendError> {
        let h = &self.health;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        if h.steps != cfg.steps || !close(h.beta_start, cfg.beta_start) || !close(h.beta_end, cfg.beta_end) {
            return Err(self.protocol(
                "/health",
                format!(
                    "bridge schedule T={} β=[{}, {}] differs from configured T={} β=[{}, {}]",
                    h.steps, h.beta_start, h.beta_end, cfg.steps, cfg.beta_start, cfg.beta_end
                ),
            ));
        }
        Ok(())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    fn call(&self, path: &str, body: Option<serde_json::Value>) -> Result<Reply, BackendError> {
        let url = self.url(path);
        let result = match body {
            Some(b) => self
                .agent
                .post(&url)
                .header("content-type", CONTENT_JSON)
                .send(serde_json::to_vec(&b).expect("request serialises")),
            None => self.agent.get(&url).call(),
        };
        let mut response = result.map_err(|e| BackendError::Unreachable {
            endpoint: url.clone(),
            cause: e.to_string(),
        })?;
        let status = response.status().as_u16();
        let content_type = response
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .split(';')
            .next()
            .unwrap_or("")
            .trim()
            .to_string();
        let body = response
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| BackendError::Unreachable {
                endpoint: url,
                cause: e.to_string(),
            })?;
        Ok(Reply {
            status,
            content_type,
            body,
        })
    }

    fn expect(&self, reply: &Reply, path: &str, content_type: &str) -> Result<(), BackendError> {
        if reply.status != 200 {
            return Err(BackendError::Status {
                endpoint: self.url(path),
                status: reply.status,
                body: String::from_utf8_lossy(&reply.body).chars().take(500).collect(),
            });
        }
        if reply.content_type != content_type {
            return Err(self.protocol(path, format!("content type `{}`, expected `{content_type}`", reply.content_type)));
        }
        Ok(())
    }

    fn protocol(&self, path: &str, detail: String) -> BackendError {
        BackendError::Protocol {
            endpoint: self.url(path),
            detail,
        }
    }

    fn json<T: serde::de::DeserializeOwned>(&self, reply: &Reply, path: &str) -> Result<T, BackendError> {
        serde_json::from_slice(&reply.body).map_err(|e| self.protocol(path, e.to_string()))
    }

    fn blob(&self, bytes: &[u8], path: &str) -> Result<LatentGrid, BackendError> {
        decode_blob(bytes).map_err(|e| self.protocol(path, e.to_string()))
    }

    fn b64(&self, text: &str, path: &str) -> Result<Vec<u8>, BackendError> {
        B64.decode(text).map_err(|e| self.protocol(path, e.to_string()))
    }

    fn png(&self, bytes: &[u8], path: &str) -> Result<FrameImage, BackendError> {
        FrameImage::from_png(bytes).map_err(|e| self.protocol(path, e.to_string()))
    }

    fn post<T: Serialize>(&self, path: &str, body: &T) -> Result<Reply, BackendError> {
        self.call(path, Some(serde_json::to_value(body).expect("request serialises")))
    }
}

impl DenoiserBackend for BridgeClient {
    fn latent_shape(&self, image_size: u32) -> LatentShape {
        let side = image_size as usize / self.health.latent_factor;
        LatentShape::new(self.health.latent_channels, side, side)
    }

    fn predict_noise(&self, x_t: &LatentGrid, t: usize, ctx: &DenoiseContext<'_>) -> Result<LatentGrid, BackendError> {
        const PATH: &str = "/denoise";
        let req = DenoiseRequest {
            latent: latent_to_b64(x_t),
            t,
            condition: ctx.condition.to_string(),
            frame: ctx.frame,
            anchor: ctx.anchor.map(latent_to_b64),
        };
        let reply = self.post(PATH, &req)?;
        self.expect(&reply, PATH, CONTENT_BLOB)?;
        let eps = self.blob(&reply.body, PATH)?;
        if eps.shape() != x_t.shape() {
            return Err(self.protocol(PATH, format!("noise shape {:?} for latent {:?}", eps.shape(), x_t.shape())));
        }
        Ok(eps)
    }

    fn encode(&self, frame: &FrameImage) -> Result<LatentGrid, BackendError> {
        const PATH: &str = "/encode";
        let reply = self.post(PATH, &EncodeRequest { image: png_to_b64(frame)? })?;
        self.expect(&reply, PATH, CONTENT_BLOB)?;
        self.blob(&reply.body, PATH)
    }

    fn decode(&self, latent: &LatentGrid) -> Result<FrameImage, BackendError> {
        const PATH: &str = "/decode";
        let reply = self.post(PATH, &DecodeRequest { latent: latent_to_b64(latent) })?;
        self.expect(&reply, PATH, CONTENT_PNG)?;
        self.png(&reply.body, PATH)
    }

    fn remote_first_frame(&self, prompt: &str, seed: u64, image_size: u32) -> Option<Result<FirstFrame, BackendError>> {
        const PATH: &str = "/first_frame";
        let run = || {
            let req = FirstFrameRequest {
                prompt: prompt.to_string(),
                seed,
                size: image_size,
            };
            let reply = self.post(PATH, &req)?;
            self.expect(&reply, PATH, CONTENT_JSON)?;
            let parsed: FirstFrameReply = self.json(&reply, PATH)?;
            let image = self.png(&self.b64(&parsed.image, PATH)?, PATH)?;
            let latent = self.blob(&self.b64(&parsed.latent, PATH)?, PATH)?;
            let initial_noise = self.blob(&self.b64(&parsed.initial_noise, PATH)?, PATH)?;
            if latent.shape() != self.latent_shape(image_size) || initial_noise.shape() != latent.shape() {
                return Err(self.protocol(PATH, format!("unexpected latent shape {:?}", latent.shape())));
            }
            Ok(FirstFrame {
                image,
                latent,
                initial_noise,
            })
        };
        Some(run())
    }
}

impl Segmenter for BridgeClient {
    fn segment(&self, req: &SegmentationRequest<'_>) -> Result<Mask, SegmentError> {
        const PATH: &str = "/segment";
        let body = SegmentRequest {
            image: png_to_b64(req.frame)?,
            phrase: req.phrase.to_string(),
            confidence: req.confidence,
        };
        let reply = self.post(PATH, &body)?;
        if reply.status == 404 {
            return Err(SegmentError::NoRegion {
                phrase: req.phrase.to_string(),
            });
        }
        self.expect(&reply, PATH, CONTENT_PNG)?;
        let mask = mask_from_png(&reply.body, Resolution::Image).map_err(|e| self.protocol(PATH, e.to_string()))?;
        if mask.dims() != (req.frame.width() as usize, req.frame.height() as usize) {
            return Err(self
                .protocol(PATH, format!("mask is {:?}, frame is {}x{}", mask.dims(), req.frame.width(), req.frame.height()))
                .into());
        }
        Ok(mask)
    }
}

impl HeadingProvider for BridgeClient {
    fn heading(&self, frame: &FrameImage, character: &str) -> Result<Direction, HeadingError> {
        const PATH: &str = "/heading";
        let body = HeadingRequest {
            image: png_to_b64(frame)?,
            character: character.to_string(),
        };
        let reply = self.post(PATH, &body)?;
        if reply.status == 404 {
            return Err(HeadingError::NotFound(character.to_string()));
        }
        self.expect(&reply, PATH, CONTENT_JSON)?;
        let parsed: HeadingReply = self.json(&reply, PATH)?;
        Direction::fuzzy_parse(&parsed.direction)
            .map_err(|e| HeadingError::Backend(self.protocol(PATH, e.to_string())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_names_endpoint() {
        let err = BridgeClient::connect_with_timeout("http://127.0.0.1:9", Duration::from_secs(2)).unwrap_err();
        match err {
            BackendError::Unreachable { endpoint, .. } => assert_eq!(endpoint, "http://127.0.0.1:9/health"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
