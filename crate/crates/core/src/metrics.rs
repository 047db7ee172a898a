//! Image quality metrics.

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Mean squared error on the 0–255 scale after clipping both images to `[0, 1]`.
pub fn mse_255(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    mse_255_shaved(a, b, 0)
}

/// As [`mse_255`], ignoring a `border`-pixel frame.
pub fn mse_255_shaved(a: &GrayImage, b: &GrayImage, border: usize) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dims(format!(
            "PSNR of {:?} against {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let (h, w) = a.dims();
    if 2 * border >= h || 2 * border >= w {
        return Err(Error::invalid(format!("border {border} consumes the whole {h}x{w} image")));
    }
    let mut sum = 0.0;
    for r in border..h - border {
        for c in border..w - border {
            let d = (a.get(r, c).clamp(0.0, 1.0) - b.get(r, c).clamp(0.0, 1.0)) * 255.0;
            sum += d * d;
        }
    }
    Ok(sum / ((h - 2 * border) * (w - 2 * border)) as f64)
}

/// Peak signal-to-noise ratio in dB, `10·log10(255²/MSE)`. Identical images
/// give `f64::INFINITY`.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    Ok(psnr_from_mse(mse_255(a, b)?))
}

pub fn psnr_shaved(a: &GrayImage, b: &GrayImage, border: usize) -> Result<f64> {
    Ok(psnr_from_mse(mse_255_shaved(a, b, border)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}
