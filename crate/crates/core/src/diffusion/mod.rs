//! DDPM/DDIM sampling over a pluggable denoiser.

pub mod backend;
pub mod noise;
pub mod schedule;
pub mod toy;

use rayon::prelude::*;
use thiserror::Error;

use crate::error::ShapeError;
use crate::latent::{LatentGrid, NonFinite};

pub use backend::{BackendError, DenoiseContext, DenoiserBackend, FirstFrame, OracleDenoiser};
pub use noise::{NoisePurpose, NoiseSource};
pub use schedule::{DiffusionSchedule, ScheduleConfig, ScheduleError};
pub use toy::ToyBackend;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffusionError {
    #[error("timestep {t} outside 0..={steps}")]
    Timestep { t: usize, steps: usize },
    #[error("sampling must run downwards, got {from} -> {to}")]
    Range { from: usize, to: usize },
    #[error("need at least 2 frames, got {0}")]
    FrameCount(usize),
    #[error("{anchors} anchors for {frames} frames")]
    AnchorCount { anchors: usize, frames: usize },
    #[error("{conditions} conditions for {frames} frames")]
    ConditionCount { conditions: usize, frames: usize },
    #[error("{stage} produced a non-finite latent")]
    NonFinite {
        stage: &'static str,
        #[source]
        source: NonFinite,
    },
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn check_t(t: usize, sched: &DiffusionSchedule) -> Result<(), DiffusionError> {
    if t > sched.steps() {
        return Err(DiffusionError::Timestep { t, steps: sched.steps() });
    }
    Ok(())
}

fn check_range(from: usize, to: usize, sched: &DiffusionSchedule) -> Result<(), DiffusionError> {
    check_t(from, sched)?;
    if to > from {
        return Err(DiffusionError::Range { from, to });
    }
    Ok(())
}

fn finite(grid: LatentGrid, stage: &'static str) -> Result<LatentGrid, DiffusionError> {
    grid.ensure_finite()
        .map_err(|source| DiffusionError::NonFinite { stage, source })?;
    Ok(grid)
}

/// Closed-form marginal `√ᾱ_t x₀ + √(1−ᾱ_t) ε` with the given `ε`.
pub fn forward_diffuse_with(
    x0: &LatentGrid,
    t: usize,
    sched: &DiffusionSchedule,
    eps: &LatentGrid,
) -> Result<LatentGrid, DiffusionError> {
    check_t(t, sched)?;
    if t == 0 {
        return Ok(x0.clone());
    }
    let ab = sched.alpha_bar(t);
    Ok(x0.affine(ab.sqrt(), eps, (1.0 - ab).sqrt())?)
}

/// Closed-form marginal with `ε` from the `(Forward, frame, t)` stream.
pub fn forward_diffuse(
    x0: &LatentGrid,
    t: usize,
    sched: &DiffusionSchedule,
    noise: &NoiseSource,
    frame: usize,
) -> Result<LatentGrid, DiffusionError> {
    check_t(t, sched)?;
    let eps = noise.gaussian(NoisePurpose::Forward, frame, t, x0.shape());
    forward_diffuse_with(x0, t, sched, &eps)
}

/// One transition `x_s = √(1−β_s) x_{s−1} + √β_s ε`.
pub fn forward_step(
    x_prev: &LatentGrid,
    s: usize,
    sched: &DiffusionSchedule,
    eps: &LatentGrid,
) -> Result<LatentGrid, DiffusionError> {
    if s == 0 || s > sched.steps() {
        return Err(DiffusionError::Timestep { t: s, steps: sched.steps() });
    }
    let b = sched.beta(s);
    Ok(x_prev.affine((1.0 - b).sqrt(), eps, b.sqrt())?)
}

/// Applies [`forward_step`] `t` times with `ε_s` from the
/// `(ForwardStep, frame, s)` streams.
pub fn forward_diffuse_stepwise(
    x0: &LatentGrid,
    t: usize,
    sched: &DiffusionSchedule,
    noise: &NoiseSource,
    frame: usize,
) -> Result<LatentGrid, DiffusionError> {
    check_t(t, sched)?;
    let mut x = x0.clone();
    for s in 1..=t {
        let eps = noise.gaussian(NoisePurpose::ForwardStep, frame, s, x0.shape());
        x = forward_step(&x, s, sched, &eps)?;
    }
    Ok(x)
}

/// Deterministic DDIM update from `t` to `t_prev` given `ε̂`.
pub fn ddim_step(x_t: &LatentGrid, eps: &LatentGrid, t: usize, t_prev: usize, sched: &DiffusionSchedule) -> LatentGrid {
    let ab = sched.alpha_bar(t);
    let ab_prev = sched.alpha_bar(t_prev);
    let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
    let (pa, pn) = (ab_prev.sqrt(), (1.0 - ab_prev).sqrt());
    let values = x_t
        .values()
        .iter()
        .zip(eps.values())
        .map(|(&x, &e)| {
            let x0 = (x - sn * e) / sa;
            pa * x0 + pn * e
        })
        .collect();
    LatentGrid::from_vec(x_t.shape(), values).expect("same shape")
}

/// Ancestral DDPM update from `t` to `t−1` given `ε̂` and fresh noise `z`.
pub fn ddpm_step(x_t: &LatentGrid, eps: &LatentGrid, t: usize, sched: &DiffusionSchedule, z: &LatentGrid) -> LatentGrid {
    let beta = sched.beta(t);
    let coef = beta / (1.0 - sched.alpha_bar(t)).sqrt();
    let inv = 1.0 / (1.0 - beta).sqrt();
    let sigma = sched.posterior_variance(t).sqrt();
    let values = x_t
        .values()
        .iter()
        .zip(eps.values())
        .zip(z.values())
        .map(|((&x, &e), &n)| inv * (x - coef * e) + sigma * n)
        .collect();
    LatentGrid::from_vec(x_t.shape(), values).expect("same shape")
}

/// Single-frame DDIM chain `t_from → t_to` without an anchor.
pub fn ddim_denoise(
    x: &LatentGrid,
    t_from: usize,
    t_to: usize,
    backend: &dyn DenoiserBackend,
    condition: &str,
    sched: &DiffusionSchedule,
    frame: usize,
) -> Result<LatentGrid, DiffusionError> {
    check_range(t_from, t_to, sched)?;
    let mut x = x.clone();
    for t in (t_to + 1..=t_from).rev() {
        let ctx = DenoiseContext {
            frame,
            condition,
            anchor: None,
            schedule: sched,
        };
        let eps = backend.predict_noise(&x, t, &ctx)?;
        x.check_same_shape(&eps, "ddim_denoise")?;
        x = finite(ddim_step(&x, &eps, t, t - 1, sched), "ddim_denoise")?;
    }
    Ok(x)
}

/// Sample `z_T`, run DDIM to 0 and decode.
pub fn generate_first_frame(
    prompt: &str,
    seed: u64,
    backend: &dyn DenoiserBackend,
    sched: &DiffusionSchedule,
    image_size: u32,
) -> Result<FirstFrame, DiffusionError> {
    if let Some(remote) = backend.remote_first_frame(prompt, seed, image_size) {
        return Ok(remote?);
    }
    let shape = backend.latent_shape(image_size);
    let z = NoiseSource::new(seed).gaussian(NoisePurpose::Initial, 0, sched.steps(), shape);
    let latent = ddim_denoise(&z, sched.steps(), 0, backend, prompt, sched, 0)?;
    let image = backend.decode(&latent)?;
    Ok(FirstFrame {
        image,
        latent,
        initial_noise: z,
    })
}

/// `F` independent copies of the frame-0 latent.
pub fn replicate_initial_latents(x: &LatentGrid, frame_count: usize) -> Result<Vec<LatentGrid>, DiffusionError> {
    if frame_count < 2 {
        return Err(DiffusionError::FrameCount(frame_count));
    }
    Ok(vec![x.clone(); frame_count])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Ddpm,
    Ddim,
}

/// Multi-frame denoising with optional anchored cross-frame attention.
///
/// Each timestep reads an immutable snapshot of every frame, so the anchor
/// K/V a frame sees never depends on scheduling; frames then advance in
/// parallel.
pub struct VideoDenoiser<'a> {
    pub backend: &'a dyn DenoiserBackend,
    pub schedule: &'a DiffusionSchedule,
    /// One condition per frame.
    pub conditions: &'a [String],
    /// Anchor frame index per frame.
    pub anchors: Option<&'a [usize]>,
    pub noise: NoiseSource,
}

impl VideoDenoiser<'_> {
    pub fn run(
        &self,
        frames: &[LatentGrid],
        t_from: usize,
        t_to: usize,
        sampler: Sampler,
    ) -> Result<Vec<LatentGrid>, DiffusionError> {
        check_range(t_from, t_to, self.schedule)?;
        if self.conditions.len() != frames.len() {
            return Err(DiffusionError::ConditionCount {
                conditions: self.conditions.len(),
                frames: frames.len(),
            });
        }
        if let Some(a) = self.anchors {
            if a.len() != frames.len() || a.iter().any(|&i| i >= frames.len()) {
                return Err(DiffusionError::AnchorCount {
                    anchors: a.len(),
                    frames: frames.len(),
                });
            }
        }
        let mut current = frames.to_vec();
        for t in (t_to + 1..=t_from).rev() {
            let snapshot = &current;
            let next: Result<Vec<LatentGrid>, DiffusionError> = (0..snapshot.len())
                .into_par_iter()
                .map(|k| self.step(snapshot, k, t, sampler))
                .collect();
            current = next?;
        }
        Ok(current)
    }

    fn step(&self, snapshot: &[LatentGrid], k: usize, t: usize, sampler: Sampler) -> Result<LatentGrid, DiffusionError> {
        let x = &snapshot[k];
        let ctx = DenoiseContext {
            frame: k,
            condition: &self.conditions[k],
            anchor: self.anchors.map(|a| &snapshot[a[k]]),
            schedule: self.schedule,
        };
        let eps = self.backend.predict_noise(x, t, &ctx)?;
        x.check_same_shape(&eps, "denoise")?;
        let out = match sampler {
            Sampler::Ddim => ddim_step(x, &eps, t, t - 1, self.schedule),
            Sampler::Ddpm => {
                let z = self.noise.gaussian(NoisePurpose::Ancestral, k, t, x.shape());
                ddpm_step(x, &eps, t, self.schedule, &z)
            }
        };
        finite(out, "denoise")
    }
}

/// Ancestral DDPM steps `t_from → t_to` on every frame.
pub fn ddpm_settle(
    frames: &[LatentGrid],
    t_from: usize,
    t_to: usize,
    video: &VideoDenoiser<'_>,
) -> Result<Vec<LatentGrid>, DiffusionError> {
    video.run(frames, t_from, t_to, Sampler::Ddpm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::LatentShape;

    fn sched() -> DiffusionSchedule {
        ScheduleConfig::default().build().unwrap()
    }

    fn x0() -> LatentGrid {
        LatentGrid::from_fn(LatentShape::new(4, 8, 8), |c, x, y| ((c * 7 + x * 3 + y) % 11) as f64 / 5.0 - 1.0)
    }

    #[test]
    fn forward_at_zero_is_identity() {
        let s = sched();
        let out = forward_diffuse(&x0(), 0, &s, &NoiseSource::new(1), 0).unwrap();
        assert!(out.bit_eq(&x0()));
        assert!(forward_diffuse(&x0(), 51, &s, &NoiseSource::new(1), 0).is_err());
    }

    #[test]
    fn ddim_identity_and_determinism() {
        let s = sched();
        let oracle = OracleDenoiser {
            noise: NoiseSource::new(3),
            inject_t: 50,
        };
        let x = x0();
        assert!(ddim_denoise(&x, 17, 17, &oracle, "", &s, 0).unwrap().bit_eq(&x));
        let a = ddim_denoise(&x, 30, 0, &oracle, "", &s, 0).unwrap();
        let b = ddim_denoise(&x, 30, 0, &oracle, "", &s, 0).unwrap();
        assert!(a.bit_eq(&b));
        assert!(matches!(
            ddim_denoise(&x, 3, 4, &oracle, "", &s, 0),
            Err(DiffusionError::Range { .. })
        ));
    }

    #[test]
    fn oracle_round_trip_recovers_x0() {
        let s = sched();
        let noise = NoiseSource::new(11);
        let xt = forward_diffuse(&x0(), 50, &s, &noise, 2).unwrap();
        let oracle = OracleDenoiser { noise, inject_t: 50 };
        let back = ddim_denoise(&xt, 50, 0, &oracle, "", &s, 2).unwrap();
        assert!(back.max_abs_diff(&x0()).unwrap() < 1e-4);
    }

    #[test]
    fn replication_has_value_semantics() {
        let mut copies = replicate_initial_latents(&x0(), 8).unwrap();
        assert_eq!(copies.len(), 8);
        copies[3].set(0, 0, 0, 99.0);
        assert!(copies[0].bit_eq(&x0()));
        assert_eq!(replicate_initial_latents(&x0(), 2).unwrap().len(), 2);
        assert!(replicate_initial_latents(&x0(), 1).is_err());
    }

    #[test]
    fn settle_is_reproducible() {
        let s = sched();
        let oracle = OracleDenoiser {
            noise: NoiseSource::new(3),
            inject_t: 50,
        };
        let conditions = vec![String::new(); 3];
        let video = VideoDenoiser {
            backend: &oracle,
            schedule: &s,
            conditions: &conditions,
            anchors: None,
            noise: NoiseSource::new(9),
        };
        let frames = vec![x0(); 3];
        let a = ddpm_settle(&frames, 20, 12, &video).unwrap();
        let b = ddpm_settle(&frames, 20, 12, &video).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.bit_eq(q)));
        let same = ddpm_settle(&frames, 12, 12, &video).unwrap();
        assert!(same.iter().zip(&frames).all(|(p, q)| p.bit_eq(q)));
        // Different frames draw different ancestral noise.
        assert!(!a[0].bit_eq(&a[1]));
    }
}
