//! Dependency-free backend: block-average codec plus two fixed-weight
//! denoisers.
//!
//! Without an anchor the denoiser steers toward the scene compiled from the
//! condition, so DDIM from any `z_T` lands on that scene. With an anchor it
//! becomes a smoothing denoiser: each cell attends over a window of its own
//! frame and the same window of the anchor frame (the scheduler's attention
//! kernel, identity projections), and the mix is snapped to the nearest
//! palette colour.

use super::backend::{BackendError, DenoiseContext, DenoiserBackend};
use crate::error::ShapeError;
use crate::frame::FrameImage;
use crate::latent::{LatentGrid, LatentShape};
use crate::scene::{compile_scene, from_latent_value, global_palette, to_latent_value, TOY_CHANNELS};
use crate::scheduler::attend_row;

#[derive(Debug, Clone)]
pub struct ToyBackend {
    factor: usize,
    /// Attention window radius in cells.
    radius: usize,
    palette: Vec<[f64; TOY_CHANNELS]>,
}

impl Default for ToyBackend {
    fn default() -> Self {
        ToyBackend::new(8)
    }
}

impl ToyBackend {
    pub fn new(factor: usize) -> Self {
        ToyBackend {
            factor,
            radius: 2,
            palette: global_palette()
                .into_iter()
                .map(|c| [to_latent_value(c[0]), to_latent_value(c[1]), to_latent_value(c[2])])
                .collect(),
        }
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    fn snap(&self, v: &[f64]) -> [f64; TOY_CHANNELS] {
        let dist = |p: &[f64; TOY_CHANNELS]| p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        *self
            .palette
            .iter()
            .min_by(|a, b| dist(a).total_cmp(&dist(b)))
            .expect("palette is never empty")
    }

    /// Clean-sample estimate from anchored windowed attention.
    fn smooth_estimate(&self, x_t: &LatentGrid, anchor: &LatentGrid, scale: f64, condition: &str) -> LatentGrid {
        let (w, h, c) = (x_t.width(), x_t.height(), x_t.channels());
        let cells = |g: &LatentGrid| -> Vec<Vec<f64>> {
            (0..h)
                .flat_map(|y| (0..w).map(move |x| (x, y)))
                .map(|(x, y)| g.cell(x, y).into_iter().map(|v| v * scale).collect())
                .collect()
        };
        let own = cells(x_t);
        let anc = cells(anchor);
        let overlay = compile_scene(condition, w).ok().filter(|s| s.entities.iter().any(|e| e.overlay));

        let r = self.radius;
        let mut out = LatentGrid::zeros(x_t.shape());
        let mut keys_own: Vec<&[f64]> = Vec::with_capacity((2 * r + 1).pow(2));
        let mut keys_anc: Vec<&[f64]> = Vec::with_capacity((2 * r + 1).pow(2));
        let mut scratch = vec![0.0; (2 * r + 1).pow(2)];
        let (mut a, mut b) = (vec![0.0; c], vec![0.0; c]);
        for y in 0..h {
            for x in 0..w {
                keys_own.clear();
                keys_anc.clear();
                for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
                    for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                        keys_own.push(&own[yy * w + xx]);
                        keys_anc.push(&anc[yy * w + xx]);
                    }
                }
                let q = &own[y * w + x];
                let n = keys_own.len();
                attend_row(q, &keys_own, &keys_own, &mut scratch[..n], &mut a);
                attend_row(q, &keys_anc, &keys_anc, &mut scratch[..n], &mut b);
                let mixed: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
                let mut value = self.snap(&mixed);
                if let Some(scene) = &overlay {
                    if let Some(e) = scene.entities.iter().find(|e| e.overlay && e.mask.get(x, y)) {
                        value = [to_latent_value(e.color[0]), to_latent_value(e.color[1]), to_latent_value(e.color[2])];
                    }
                }
                for (ch, v) in value.iter().enumerate().take(c) {
                    out.set(ch, x, y, *v);
                }
            }
        }
        out
    }
}

impl DenoiserBackend for ToyBackend {
    fn latent_shape(&self, image_size: u32) -> LatentShape {
        let n = image_size as usize / self.factor;
        LatentShape::new(TOY_CHANNELS, n, n)
    }

    fn predict_noise(&self, x_t: &LatentGrid, t: usize, ctx: &DenoiseContext<'_>) -> Result<LatentGrid, BackendError> {
        if x_t.channels() != TOY_CHANNELS || x_t.width() != x_t.height() {
            return Err(ShapeError::new("toy denoiser", LatentShape::new(TOY_CHANNELS, x_t.width(), x_t.width()), x_t.shape()).into());
        }
        let ab = ctx.schedule.alpha_bar(t);
        let x0 = match ctx.anchor {
            None => compile_scene(ctx.condition, x_t.width())?.latent(),
            Some(anchor) => {
                x_t.check_same_shape(anchor, "toy denoiser anchor")?;
                self.smooth_estimate(x_t, anchor, 1.0 / ab.sqrt(), ctx.condition)
            }
        };
        let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
        let values = x_t
            .values()
            .iter()
            .zip(x0.values())
            .map(|(&x, &c)| (x - sa * c) / sn)
            .collect();
        Ok(LatentGrid::from_vec(x_t.shape(), values)?)
    }

    fn encode(&self, frame: &FrameImage) -> Result<LatentGrid, BackendError> {
        let f = self.factor;
        let (w, h) = (frame.width() as usize, frame.height() as usize);
        if w % f != 0 || h % f != 0 {
            return Err(ShapeError::new("toy encode", (w, h), f).into());
        }
        let norm = 1.0 / (f * f) as f64;
        Ok(LatentGrid::from_fn(LatentShape::new(TOY_CHANNELS, h / f, w / f), |c, x, y| {
            let mut sum = 0.0;
            for py in y * f..(y + 1) * f {
                for px in x * f..(x + 1) * f {
                    sum += to_latent_value(frame.pixel(px as u32, py as u32)[c]);
                }
            }
            sum * norm
        }))
    }

    fn decode(&self, latent: &LatentGrid) -> Result<FrameImage, BackendError> {
        if latent.channels() != TOY_CHANNELS {
            return Err(ShapeError::new("toy decode", TOY_CHANNELS, latent.channels()).into());
        }
        let f = self.factor;
        let (w, h) = (latent.width() * f, latent.height() * f);
        let mut img = FrameImage::new(w as u32, h as u32, [0, 0, 0]);
        for y in 0..latent.height() {
            for x in 0..latent.width() {
                let rgb = [
                    from_latent_value(latent.get(0, x, y)),
                    from_latent_value(latent.get(1, x, y)),
                    from_latent_value(latent.get(2, x, y)),
                ];
                for py in y * f..(y + 1) * f {
                    for px in x * f..(x + 1) * f {
                        img.put_pixel(px as u32, py as u32, rgb);
                    }
                }
            }
        }
        Ok(img)
    }
}
