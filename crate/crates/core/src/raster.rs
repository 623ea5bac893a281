//! Planar rasters shared by every stage: multi-channel float images with
//! values in `[0, 1]` and binary maps.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage, Rgba, RgbaImage};

use crate::error::{Error, Result};
use crate::fsutil;

/// Interleaved `height × width × channels` image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, value: &[f64]) -> Self {
        let channels = value.len();
        let mut data = Vec::with_capacity(width * height * channels);
        for _ in 0..width * height {
            data.extend_from_slice(value);
        }
        Image {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Image {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.index(x, y, 0);
        &self.data[i..i + self.channels]
    }

    pub fn same_size(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn dims(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    /// Copies channel `c` into a single-channel plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn set_channel(&mut self, c: usize, plane: &[f64]) {
        for (i, v) in plane.iter().enumerate() {
            self.data[i * self.channels + c] = *v;
        }
    }

    /// Keeps the first `channels` channels, zero-padding when widening.
    pub fn with_channels(&self, channels: usize) -> Image {
        Image::from_fn(self.width, self.height, channels, |x, y, c| {
            if c < self.channels {
                self.get(x, y, c)
            } else {
                0.0
            }
        })
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn load_png(path: &Path) -> Result<Image> {
        let img = image::open(path)
            .map_err(|e| Error::format(path, format!("cannot read PNG: {e}")))?
            .to_rgba8();
        let (w, h) = img.dimensions();
        let mut out = Image::zeros(w as usize, h as usize, 4);
        for (x, y, p) in img.enumerate_pixels() {
            for c in 0..4 {
                out.set(x as usize, y as usize, c, f64::from(p[c]) / 255.0);
            }
        }
        Ok(out)
    }

    /// Loads an RGBA PNG and composites it over black, keeping RGB.
    pub fn load_png_rgb(path: &Path) -> Result<Image> {
        let rgba = Image::load_png(path)?;
        Ok(Image::from_fn(rgba.width, rgba.height, 3, |x, y, c| {
            rgba.get(x, y, c) * rgba.get(x, y, 3)
        }))
    }

    /// Writes 1, 3 or 4 channel images as 8-bit PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (w, h) = (self.width as u32, self.height as u32);
        let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let bytes = match self.channels {
            1 => encode_png(GrayImage::from_fn(w, h, |x, y| {
                Luma([q(self.get(x as usize, y as usize, 0))])
            }))?,
            3 => encode_png(RgbImage::from_fn(w, h, |x, y| {
                let p = self.pixel(x as usize, y as usize);
                Rgb([q(p[0]), q(p[1]), q(p[2])])
            }))?,
            4 => encode_png(RgbaImage::from_fn(w, h, |x, y| {
                let p = self.pixel(x as usize, y as usize);
                Rgba([q(p[0]), q(p[1]), q(p[2]), q(p[3])])
            }))?,
            n => {
                return Err(Error::InvalidArgument(format!(
                    "cannot encode {n}-channel image as PNG"
                )))
            }
        };
        fsutil::write_atomic(path, &bytes)
    }
}

fn encode_png<P>(img: ImageBuffer<P, Vec<u8>>) -> Result<Vec<u8>>
where
    P: image::Pixel<Subpixel = u8> + image::PixelWithColorType,
{
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::InvalidArgument(format!("PNG encoding failed: {e}")))?;
    Ok(bytes)
}

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMap {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        BinaryMap {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMap {
            width,
            height,
            bits,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn same_size(&self, other: &BinaryMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn to_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Reads a grayscale PNG, thresholding at mid-gray.
    pub fn load_png(path: &Path) -> Result<BinaryMap> {
        let img = image::open(path)
            .map_err(|e| Error::format(path, format!("cannot read PNG: {e}")))?
            .to_luma8();
        let (w, h) = img.dimensions();
        Ok(BinaryMap::from_fn(w as usize, h as usize, |x, y| {
            img.get_pixel(x as u32, y as u32)[0] >= 128
        }))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(x as usize, y as usize) { 255 } else { 0 }])
        });
        fsutil::write_atomic(path, &encode_png(img)?)
    }
}
