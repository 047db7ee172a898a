//! Luminance images, colour conversion and PNG/BMP I/O.
//!
//! Pixel intensities are stored as `f64` in `[0, 1]` (nominally; arithmetic
//! on the planes may leave that range and only [`GrayImage::to_u8`] clips).

use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Single-channel image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::dims(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite pixel at index {bad}")));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(height, width, pixels)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    /// Crops to the largest size whose sides are multiples of `factor`.
    pub fn modcrop(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("modcrop factor must be positive"));
        }
        let h = self.height - self.height % factor;
        let w = self.width - self.width % factor;
        self.crop(0, 0, h, w)
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::dims(format!(
                "crop {height}x{width} at ({top},{left}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        Self::from_fn(height, width, |r, c| self.get(top + r, left + c))
    }

    /// Clips to `[0, 1]`.
    pub fn clipped(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// 8-bit quantization after clipping.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Round-trips through 8-bit storage, i.e. exactly what a saved PNG holds.
    pub fn quantized(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.to_u8().into_iter().map(|v| v as f64 / 255.0).collect(),
        }
    }

    pub fn from_u8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_u8())
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Loads any supported image; colour inputs are reduced to luminance.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let rgb = RgbImage::load(path)?;
        if rgb.is_gray() {
            Ok(rgb.channel(0))
        } else {
            to_luminance(&rgb)
        }
    }
}

/// Interleaved 8-bit image as read from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != height * width * channels {
            return Err(Error::dims(format!(
                "{} bytes for {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let is_gray = matches!(
            img.color(),
            image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
        );
        if is_gray {
            let g = img.to_luma8();
            let (w, h) = g.dimensions();
            Self::new(h as usize, w as usize, 1, g.into_raw())
        } else {
            let c = img.to_rgb8();
            let (w, h) = c.dimensions();
            Self::new(h as usize, w as usize, 3, c.into_raw())
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            3 => image::ExtendedColorType::Rgb8,
            c => return Err(Error::invalid(format!("cannot write {c}-channel PNG"))),
        };
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    fn channel(&self, k: usize) -> GrayImage {
        let bytes: Vec<u8> = self.data.iter().skip(k).step_by(self.channels).copied().collect();
        GrayImage::from_u8(self.height, self.width, &bytes).expect("consistent dimensions")
    }
}

// ITU-R BT.601 as used by Matlab's rgb2ycbcr, RGB in [0,1], output in [0,255].
const YCC_MATRIX: [[f64; 3]; 3] = [
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
];
const YCC_OFFSET: [f64; 3] = [16.0, 128.0, 128.0];

/// BT.601 luma of an 8-bit RGB image, scaled to `[0, 1]`.
pub fn to_luminance(rgb: &RgbImage) -> Result<GrayImage> {
    if rgb.channels != 3 {
        return Err(Error::invalid(format!(
            "expected 3 colour channels, got {}",
            rgb.channels
        )));
    }
    let [wr, wg, wb] = YCC_MATRIX[0];
    let pixels = rgb
        .data
        .chunks_exact(3)
        .map(|px| {
            let y = (wr * px[0] as f64 + wg * px[1] as f64 + wb * px[2] as f64) / 255.0 + YCC_OFFSET[0];
            y / 255.0
        })
        .collect();
    GrayImage::new(rgb.height, rgb.width, pixels)
}

/// Y, Cb and Cr planes, each scaled to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct YCbCr {
    pub y: GrayImage,
    pub cb: GrayImage,
    pub cr: GrayImage,
}

impl YCbCr {
    pub fn from_rgb(rgb: &RgbImage) -> Result<Self> {
        if rgb.channels != 3 {
            return Err(Error::invalid(format!(
                "expected 3 colour channels, got {}",
                rgb.channels
            )));
        }
        let n = rgb.height * rgb.width;
        let mut planes = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for px in rgb.data.chunks_exact(3) {
            let v = [px[0] as f64 / 255.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0];
            for (k, plane) in planes.iter_mut().enumerate() {
                let row = YCC_MATRIX[k];
                let val = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + YCC_OFFSET[k];
                plane.push(val / 255.0);
            }
        }
        let [y, cb, cr] = planes;
        Ok(Self {
            y: GrayImage::new(rgb.height, rgb.width, y)?,
            cb: GrayImage::new(rgb.height, rgb.width, cb)?,
            cr: GrayImage::new(rgb.height, rgb.width, cr)?,
        })
    }

    pub fn to_rgb(&self) -> Result<RgbImage> {
        let (h, w) = self.y.dims();
        if self.cb.dims() != (h, w) || self.cr.dims() != (h, w) {
            return Err(Error::dims("Y, Cb and Cr planes differ in size"));
        }
        let t = Matrix3::from_fn(|r, c| YCC_MATRIX[r][c]);
        let inv = t.try_inverse().expect("BT.601 matrix is invertible");
        let offset = Vector3::from(YCC_OFFSET);
        let mut data = Vec::with_capacity(h * w * 3);
        for ((&y, &cb), &cr) in self
            .y
            .pixels()
            .iter()
            .zip(self.cb.pixels())
            .zip(self.cr.pixels())
        {
            let ycc = Vector3::new(y * 255.0, cb * 255.0, cr * 255.0);
            let rgb = inv * (ycc - offset);
            for v in rgb.iter() {
                data.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        RgbImage::new(h, w, 3, data)
    }
}
