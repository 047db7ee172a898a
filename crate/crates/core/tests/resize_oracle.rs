//! The separable resampler against a direct two-dimensional evaluation of
//! the same kernel sums with explicit mirror padding.

mod common;

use deepam::resize::{cubic, downscale, resize_bicubic, scaled_len, upscale};
use deepam::GrayImage;
use proptest::prelude::*;
use rand::Rng;

/// Weights and 0-based source indices for output sample `i` (1-based) of a
/// length-`n` axis resized by `scale`.
fn axis_weights(i: usize, n: usize, scale: f64) -> Vec<(usize, f64)> {
    let shrink = scale < 1.0;
    let support = if shrink { 2.0 / scale } else { 2.0 };
    // Output sample centre in 1-based input coordinates.
    let centre = (i as f64 - 0.5) / scale + 0.5;
    let lo = (centre - support).floor() as i64 - 1;
    let hi = (centre + support).ceil() as i64 + 1;
    let mut taps: Vec<(usize, f64)> = Vec::new();
    for k in lo..=hi {
        let d = centre - k as f64;
        let w = if shrink { scale * cubic(scale * d) } else { cubic(d) };
        if w == 0.0 {
            continue;
        }
        // Reflect 1-based k into 1..=n: ..., 2, 1 | 1, 2, ..., n | n, n-1, ...
        let mut j = k;
        loop {
            if j < 1 {
                j = 1 - j;
            } else if j > n as i64 {
                j = 2 * n as i64 + 1 - j;
            } else {
                break;
            }
        }
        taps.push((j as usize - 1, w));
    }
    let total: f64 = taps.iter().map(|t| t.1).sum();
    taps.iter().map(|&(j, w)| (j, w / total)).collect()
}

fn resize_oracle(img: &GrayImage, scale: f64) -> GrayImage {
    let (h, w) = img.dims();
    let (oh, ow) = (scaled_len(h, scale), scaled_len(w, scale));
    GrayImage::from_fn(oh, ow, |r, c| {
        let wr = axis_weights(r + 1, h, scale);
        let wc = axis_weights(c + 1, w, scale);
        let mut acc = 0.0;
        for &(a, x) in &wr {
            for &(b, y) in &wc {
                acc += x * y * img.get(a, b);
            }
        }
        acc
    })
    .unwrap()
}

fn max_diff(a: &GrayImage, b: &GrayImage) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.pixels().iter().zip(b.pixels()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn ramp_halving_matches_the_oracle() {
    let ramp = GrayImage::from_fn(8, 8, |_, c| (c + 1) as f64).unwrap();
    let got = downscale(&ramp, 2).unwrap();
    assert_eq!(got.dims(), (4, 4));
    assert!(max_diff(&got, &resize_oracle(&ramp, 0.5)) < 1e-12);
}

#[test]
fn halving_reproduces_a_ramp_away_from_the_border() {
    // Output sample j (0-based) is centred on input position 2j + 1.5; with
    // the shrunken kernel reaching 4 samples either side, j = 2..=5 never
    // touch the mirrored border of a 16-wide ramp.
    let ramp = GrayImage::from_fn(16, 16, |_, c| (c + 1) as f64).unwrap();
    let got = downscale(&ramp, 2).unwrap();
    for r in 0..8 {
        for j in 2..=5 {
            assert!((got.get(r, j) - (2 * j) as f64 - 1.5).abs() < 1e-12, "col {j}: {}", got.get(r, j));
        }
    }
}

#[test]
fn constant_images_stay_constant() {
    let img = GrayImage::filled(9, 13, 0.25).unwrap();
    for s in [0.5, 1.0 / 3.0, 2.0, 3.0] {
        let out = resize_bicubic(&img, s).unwrap();
        assert!(out.pixels().iter().all(|v| (v - 0.25).abs() < 1e-14), "scale {s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn integer_factors_match_the_oracle(h in 3usize..20, w in 3usize..20, factor in 2usize..5, seed in 0u64..10_000) {
        let mut rng = common::rng(seed);
        let pixels = (0..h * w * factor * factor).map(|_| rng.random::<f64>()).collect();
        let img = GrayImage::new(h * factor, w * factor, pixels).unwrap();
        let down = downscale(&img, factor).unwrap();
        prop_assert!(max_diff(&down, &resize_oracle(&img, 1.0 / factor as f64)) < 1e-12);
        let up = upscale(&down, factor).unwrap();
        prop_assert_eq!(up.dims(), img.dims());
        prop_assert!(max_diff(&up, &resize_oracle(&down, factor as f64)) < 1e-12);
    }
}
