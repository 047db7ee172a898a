//! Bicubic resampling that reproduces Matlab's `imresize` defaults.
//!
//! Keys cubic kernel with `a = -0.5`, the kernel stretched by `1/scale` when
//! shrinking (antialiasing), symmetric boundary extension, and separable
//! passes ordered by increasing scale (rows first on ties).

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Keys cubic convolution kernel, `a = -0.5`.
#[inline]
pub fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    let ax2 = ax * ax;
    let ax3 = ax2 * ax;
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax <= 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

/// Per-output-sample taps along one axis.
#[derive(Debug, Clone)]
struct Contributions {
    taps: usize,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

/// Maps a 1-based, possibly out-of-range index onto `[0, len)` by mirroring
/// (`1..len, len..1, 1..len, ...`).
#[inline]
fn mirror_index(one_based: i64, len: usize) -> usize {
    let period = 2 * len as i64;
    let m = (one_based - 1).rem_euclid(period) as usize;
    if m < len {
        m
    } else {
        2 * len - 1 - m
    }
}

fn contributions(in_len: usize, out_len: usize, scale: f64) -> Contributions {
    let shrinking = scale < 1.0;
    let kernel_width = if shrinking { 4.0 / scale } else { 4.0 };
    let taps = kernel_width.ceil() as usize + 2;
    let mut indices = Vec::with_capacity(out_len * taps);
    let mut weights = Vec::with_capacity(out_len * taps);

    for i in 1..=out_len {
        let u = i as f64 / scale + 0.5 * (1.0 - 1.0 / scale);
        let left = (u - kernel_width / 2.0).floor() as i64;
        let start = weights.len();
        let mut sum = 0.0;
        for k in 0..taps as i64 {
            let idx = left + k;
            let dist = u - idx as f64;
            let w = if shrinking {
                scale * cubic(scale * dist)
            } else {
                cubic(dist)
            };
            sum += w;
            weights.push(w);
            indices.push(mirror_index(idx, in_len));
        }
        for w in &mut weights[start..] {
            *w /= sum;
        }
    }
    Contributions {
        taps,
        indices,
        weights,
    }
}

fn resize_rows(img: &GrayImage, out_h: usize, scale: f64) -> GrayImage {
    let (h, w) = img.dims();
    let c = contributions(h, out_h, scale);
    let mut out = vec![0.0; out_h * w];
    for i in 0..out_h {
        let taps = i * c.taps..(i + 1) * c.taps;
        let row = &mut out[i * w..(i + 1) * w];
        for (&src, &wt) in c.indices[taps.clone()].iter().zip(&c.weights[taps]) {
            if wt == 0.0 {
                continue;
            }
            let src_row = &img.pixels()[src * w..(src + 1) * w];
            for (o, &s) in row.iter_mut().zip(src_row) {
                *o += wt * s;
            }
        }
    }
    GrayImage::new(out_h, w, out).expect("valid resized dimensions")
}

fn resize_cols(img: &GrayImage, out_w: usize, scale: f64) -> GrayImage {
    let (h, w) = img.dims();
    let c = contributions(w, out_w, scale);
    let mut out = vec![0.0; h * out_w];
    for r in 0..h {
        let src_row = &img.pixels()[r * w..(r + 1) * w];
        let dst_row = &mut out[r * out_w..(r + 1) * out_w];
        for (j, dst) in dst_row.iter_mut().enumerate() {
            let taps = j * c.taps..(j + 1) * c.taps;
            *dst = c.indices[taps.clone()]
                .iter()
                .zip(&c.weights[taps])
                .map(|(&src, &wt)| wt * src_row[src])
                .sum();
        }
    }
    GrayImage::new(h, out_w, out).expect("valid resized dimensions")
}

/// Output length for an input side scaled by `scale` (rounded to nearest).
pub fn scaled_len(len: usize, scale: f64) -> usize {
    (len as f64 * scale).round() as usize
}

/// Resamples by `scale` in both directions.
pub fn resize_bicubic(img: &GrayImage, scale: f64) -> Result<GrayImage> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    let out_h = scaled_len(img.height(), scale);
    let out_w = scaled_len(img.width(), scale);
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(format!(
            "resizing {}x{} by {scale} gives an empty image",
            img.height(),
            img.width()
        )));
    }
    if scale == 1.0 {
        return Ok(img.clone());
    }
    // Equal scales: Matlab processes dimension 1 (rows) first.
    let tmp = resize_rows(img, out_h, scale);
    Ok(resize_cols(&tmp, out_w, scale))
}

/// Downscale by an integer factor, as used to synthesise LR inputs.
pub fn downscale(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    resize_bicubic(img, 1.0 / factor as f64)
}

pub fn upscale(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    resize_bicubic(img, factor as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_interpolates() {
        assert_eq!(cubic(0.0), 1.0);
        assert_eq!(cubic(1.0), 0.0);
        assert_eq!(cubic(2.0), 0.0);
        assert_eq!(cubic(-1.0), 0.0);
        assert!((cubic(0.5) - 0.5625).abs() < 1e-15);
        assert!((cubic(1.5) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn mirror_matches_matlab_padding() {
        // aux = [1..4, 4..1]
        let len = 4;
        let mapped: Vec<usize> = (-3..=9).map(|i| mirror_index(i, len)).collect();
        assert_eq!(mapped, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0, 0]);
    }

    #[test]
    fn weights_sum_to_one() {
        for &(n, m, s) in &[(8usize, 4usize, 0.5), (4, 8, 2.0), (12, 6, 0.5), (7, 21, 3.0)] {
            let c = contributions(n, m, s);
            for i in 0..m {
                let sum: f64 = c.weights[i * c.taps..(i + 1) * c.taps].iter().sum();
                assert!((sum - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_at_unit_scale() {
        let img = GrayImage::from_fn(5, 7, |r, c| (r * 7 + c) as f64 / 35.0).unwrap();
        assert_eq!(resize_bicubic(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn constants_are_preserved() {
        let img = GrayImage::filled(9, 10, 0.3).unwrap();
        for &s in &[0.5, 2.0, 1.0 / 3.0, 3.0] {
            let out = resize_bicubic(&img, s).unwrap();
            assert!(out.pixels().iter().all(|v| (v - 0.3).abs() < 1e-14), "scale {s}");
        }
    }

    #[test]
    fn output_dims_are_rounded() {
        let img = GrayImage::filled(7, 9, 0.0).unwrap();
        assert_eq!(resize_bicubic(&img, 0.5).unwrap().dims(), (4, 5));
        assert_eq!(resize_bicubic(&img, 2.0).unwrap().dims(), (14, 18));
    }

    #[test]
    fn rejects_bad_scales() {
        let img = GrayImage::filled(2, 2, 0.0).unwrap();
        assert!(resize_bicubic(&img, 0.0).is_err());
        assert!(resize_bicubic(&img, -1.0).is_err());
        assert!(resize_bicubic(&img, 0.1).is_err());
    }
}
