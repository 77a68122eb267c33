//! RGB frames.

use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};

/// An 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameImage {
    pixels: RgbImage,
}

impl FrameImage {
    pub fn new(width: u32, height: u32, background: [u8; 3]) -> Self {
        FrameImage {
            pixels: RgbImage::from_pixel(width, height, Rgb(background)),
        }
    }

    pub fn from_rgb(pixels: RgbImage) -> Self {
        FrameImage { pixels }
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels.get_pixel(x, y).0
    }

    pub fn put_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        self.pixels.put_pixel(x, y, Rgb(rgb));
    }

    pub fn as_rgb(&self) -> &RgbImage {
        &self.pixels
    }

    pub fn as_rgb_mut(&mut self) -> &mut RgbImage {
        &mut self.pixels
    }

    pub fn into_rgb(self) -> RgbImage {
        self.pixels
    }

    pub fn to_png(&self) -> Result<Vec<u8>, image::ImageError> {
        let mut out = Cursor::new(Vec::new());
        self.pixels.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn from_png(bytes: &[u8]) -> Result<FrameImage, image::ImageError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
        Ok(FrameImage {
            pixels: img.to_rgb8(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_lossless() {
        let mut f = FrameImage::new(5, 3, [10, 20, 30]);
        f.put_pixel(4, 2, [255, 0, 7]);
        let back = FrameImage::from_png(&f.to_png().unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
