//! Run directory layout and file formats.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::blob::{decode_blob, encode_blob, BlobError, Dtype};
use crate::frame::FrameImage;
use crate::latent::LatentGrid;
use crate::mask::{Mask, Resolution};

pub const PLAN_FILE: &str = "plan.json";
pub const REPORT_FILE: &str = "report.json";
pub const LATENTS_T1_FILE: &str = "latents_t1.bin";
pub const GIF_FILE: &str = "video.gif";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}: {detail}")]
    Image { path: PathBuf, detail: String },
    #[error("{path}: {source}")]
    Blob { path: PathBuf, source: BlobError },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.to_path_buf(),
        source,
    }
}

pub fn frame_file(k: usize) -> String {
    format!("frame_{k:03}.png")
}

pub fn mask_file(character: &str, k: usize) -> String {
    format!("mask_{character}_{k:03}.png")
}

/// 1-bit grayscale PNG, white inside the mask.
pub fn mask_to_png(mask: &Mask) -> Vec<u8> {
    let (w, h) = mask.dims();
    let row_bytes = w.div_ceil(8);
    let mut data = vec![0u8; row_bytes * h];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                data[y * row_bytes + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::One);
        let mut writer = enc.write_header().expect("in-memory PNG header");
        writer.write_image_data(&data).expect("in-memory PNG data");
    }
    out
}

/// Any grayscale or colour PNG; pixels at or above half intensity are in
/// the mask.
pub fn mask_from_png(bytes: &[u8], resolution: Resolution) -> Result<Mask, image::ImageError> {
    let img = image::load(Cursor::new(bytes), image::ImageFormat::Png)?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(Mask::from_fn(w as usize, h as usize, resolution, |x, y| {
        img.get_pixel(x as u32, y as u32).0[0] >= 128
    }))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(fs_err(path))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(fs_err(path))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(fs_err(path))
}

pub fn write_frame(path: &Path, frame: &FrameImage) -> Result<(), IoError> {
    let bytes = frame.to_png().map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    write_bytes(path, &bytes)
}

pub fn read_frame(path: &Path) -> Result<FrameImage, IoError> {
    FrameImage::from_png(&read_bytes(path)?).map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn read_mask(path: &Path) -> Result<Mask, IoError> {
    mask_from_png(&read_bytes(path)?, Resolution::Image).map_err(|e| IoError::Image {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Concatenated `f64` blobs, one per frame.
pub fn write_latents(path: &Path, latents: &[LatentGrid]) -> Result<(), IoError> {
    let mut out = Vec::new();
    for l in latents {
        let blob = encode_blob(l, Dtype::F64Le);
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        out.extend_from_slice(&blob);
    }
    write_bytes(path, &out)
}

pub fn read_latents(path: &Path) -> Result<Vec<LatentGrid>, IoError> {
    let bytes = read_bytes(path)?;
    let format = |detail: &str| IoError::Format {
        path: path.to_path_buf(),
        detail: detail.to_string(),
    };
    let mut out = Vec::new();
    let mut rest = bytes.as_slice();
    while !rest.is_empty() {
        let len: [u8; 8] = rest.get(..8).and_then(|b| b.try_into().ok()).ok_or_else(|| format("truncated length"))?;
        let len = u64::from_le_bytes(len) as usize;
        let blob = rest.get(8..8 + len).ok_or_else(|| format("truncated blob"))?;
        out.push(decode_blob(blob).map_err(|source| IoError::Blob {
            path: path.to_path_buf(),
            source,
        })?);
        rest = &rest[8 + len..];
    }
    Ok(out)
}

/// Animated GIF, 10 frames per second, looping.
pub fn write_gif(path: &Path, frames: &[FrameImage]) -> Result<(), IoError> {
    use image::codecs::gif::{GifEncoder, Repeat};
    use image::{Delay, Frame};
    let file = fs::File::create(path).map_err(fs_err(path))?;
    let image_err = |e: image::ImageError| IoError::Image {
        path: path.to_path_buf(),
        detail: e.to_string(),
    };
    let mut enc = GifEncoder::new_with_speed(file, 10);
    enc.set_repeat(Repeat::Infinite).map_err(image_err)?;
    let frames = frames.iter().map(|f| {
        let rgba = image::DynamicImage::ImageRgb8(f.as_rgb().clone()).to_rgba8();
        Frame::from_parts(rgba, 0, 0, Delay::from_numer_denom_ms(100, 1))
    });
    enc.encode_frames(frames).map_err(image_err)
}

/// Writes into `<dir>.staging` and renames over `dir` once everything is
/// on disk, so a failed run never leaves a half-written directory behind.
pub struct Staging {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(target: &Path) -> Result<Staging, IoError> {
        let mut name = target.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "out".into());
        name.push(".staging");
        let staging = target.with_file_name(name);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(fs_err(&staging))?;
        }
        fs::create_dir_all(&staging).map_err(fs_err(&staging))?;
        Ok(Staging {
            target: target.to_path_buf(),
            staging,
            committed: false,
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.staging.join(file)
    }

    pub fn commit(mut self) -> Result<PathBuf, IoError> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(fs_err(&self.target))?;
        }
        fs::rename(&self.staging, &self.target).map_err(fs_err(&self.target))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::LatentShape;

    #[test]
    fn names() {
        assert_eq!(frame_file(3), "frame_003.png");
        assert_eq!(mask_file("airplane", 12), "mask_airplane_012.png");
    }

    #[test]
    fn mask_png_round_trip() {
        let m = Mask::from_fn(13, 5, Resolution::Image, |x, y| (x * 3 + y) % 4 == 0);
        let png = mask_to_png(&m);
        let back = mask_from_png(&png, Resolution::Image).unwrap();
        assert_eq!(back, m);
        let decoded = image::load_from_memory(&png).unwrap();
        assert_eq!(decoded.color(), image::ColorType::L8);
    }

    #[test]
    fn latents_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LATENTS_T1_FILE);
        let a = LatentGrid::from_fn(LatentShape::new(2, 3, 4), |c, x, y| (c + x * y) as f64 / 7.0);
        write_latents(&path, &[a.clone(), a.scale(-1.0)]).unwrap();
        let back = read_latents(&path).unwrap();
        assert!(back[0].bit_eq(&a) && back[1].bit_eq(&a.scale(-1.0)));
        write_bytes(&path, &[1, 2, 3]).unwrap();
        assert!(matches!(read_latents(&path), Err(IoError::Format { .. })));
    }

    #[test]
    fn staging_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("run");
        fs::create_dir(&target).unwrap();
        fs::write(target.join("old.txt"), "x").unwrap();
        let stage = Staging::new(&target).unwrap();
        fs::write(stage.path("new.txt"), "y").unwrap();
        stage.commit().unwrap();
        assert!(target.join("new.txt").exists());
        assert!(!target.join("old.txt").exists());

        let abandoned = Staging::new(&target).unwrap();
        let path = abandoned.path("x");
        drop(abandoned);
        assert!(!path.parent().unwrap().exists());
        assert!(target.join("new.txt").exists());
    }

    #[test]
    fn gif_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(GIF_FILE);
        write_gif(&path, &[FrameImage::new(8, 8, [10, 20, 30]), FrameImage::new(8, 8, [200, 0, 0])]).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..3], b"GIF");
    }
}
