//! Procedurally generated grayscale scenes with the ingredients natural
//! images have — smooth shading, sharp edges at all orientations, corners,
//! thin lines and periodic texture — for tests and demos without datasets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::image::GrayImage;

enum Shape {
    Disc { cy: f64, cx: f64, r: f64, v: f64 },
    /// Rotated rectangle given by centre, half-extents and angle.
    Rect { cy: f64, cx: f64, hy: f64, hx: f64, cos: f64, sin: f64, v: f64 },
    /// Thin anti-aliased line through `(cy, cx)` with normal angle.
    Line { cy: f64, cx: f64, cos: f64, sin: f64, half_width: f64, v: f64 },
    /// Sinusoidal grating inside a disc.
    Grating { cy: f64, cx: f64, r: f64, ky: f64, kx: f64, amp: f64 },
}

/// Soft coverage for a signed distance (negative inside) with a one-pixel
/// transition, which keeps edges sharp but alias-free.
fn coverage(dist: f64) -> f64 {
    (0.5 - dist).clamp(0.0, 1.0)
}

impl Shape {
    fn random<R: Rng>(rng: &mut R, h: f64, w: f64) -> Self {
        let cy = rng.random_range(0.0..h);
        let cx = rng.random_range(0.0..w);
        let size = h.min(w);
        let v = rng.random_range(0.05..0.95);
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        match rng.random_range(0..4) {
            0 => Shape::Disc {
                cy,
                cx,
                r: rng.random_range(0.05..0.25) * size,
                v,
            },
            1 => Shape::Rect {
                cy,
                cx,
                hy: rng.random_range(0.04..0.2) * size,
                hx: rng.random_range(0.04..0.2) * size,
                cos: angle.cos(),
                sin: angle.sin(),
                v,
            },
            2 => Shape::Line {
                cy,
                cx,
                cos: angle.cos(),
                sin: angle.sin(),
                half_width: rng.random_range(0.4..1.5),
                v,
            },
            _ => {
                let period = rng.random_range(6.0..16.0);
                let k = 2.0 * std::f64::consts::PI / period;
                Shape::Grating {
                    cy,
                    cx,
                    r: rng.random_range(0.08..0.2) * size,
                    ky: k * angle.sin(),
                    kx: k * angle.cos(),
                    amp: rng.random_range(0.1..0.35),
                }
            }
        }
    }

    /// Blends the shape into `base` at pixel centre `(y, x)`.
    fn paint(&self, y: f64, x: f64, base: f64) -> f64 {
        match *self {
            Shape::Disc { cy, cx, r, v } => {
                let a = coverage(((y - cy).hypot(x - cx)) - r);
                base * (1.0 - a) + v * a
            }
            Shape::Rect { cy, cx, hy, hx, cos, sin, v } => {
                let (dy, dx) = (y - cy, x - cx);
                let u = dx * cos + dy * sin;
                let t = -dx * sin + dy * cos;
                let a = coverage((u.abs() - hx).max(t.abs() - hy));
                base * (1.0 - a) + v * a
            }
            Shape::Line { cy, cx, cos, sin, half_width, v } => {
                let d = ((x - cx) * cos + (y - cy) * sin).abs();
                let a = coverage(d - half_width);
                base * (1.0 - a) + v * a
            }
            Shape::Grating { cy, cx, r, ky, kx, amp } => {
                let a = coverage(((y - cy).hypot(x - cx)) - r);
                let wave = amp * (ky * (y - cy) + kx * (x - cx)).sin();
                (base + a * wave).clamp(0.0, 1.0)
            }
        }
    }
}

/// Deterministic `height x width` scene in `[0, 1]` for the given seed.
pub fn test_scene(height: usize, width: usize, seed: u64) -> GrayImage {
    assert!(height > 0 && width > 0, "scene must be non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f64, width as f64);
    let g0 = rng.random_range(0.2..0.8);
    let gy = rng.random_range(-0.3..0.3);
    let gx = rng.random_range(-0.3..0.3);
    let count = 6 + (height * width) / 400;
    let shapes: Vec<Shape> = (0..count).map(|_| Shape::random(&mut rng, h, w)).collect();
    GrayImage::from_fn(height, width, |r, c| {
        let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
        let mut v = g0 + gy * (y / h - 0.5) + gx * (x / w - 0.5);
        for s in &shapes {
            v = s.paint(y, x, v);
        }
        v.clamp(0.0, 1.0)
    })
    .expect("scene dimensions are positive")
}

/// `count` scenes with seeds `seed, seed+1, …`.
pub fn scene_set(count: usize, height: usize, width: usize, seed: u64) -> Vec<GrayImage> {
    (0..count as u64)
        .map(|k| test_scene(height, width, seed.wrapping_add(k)))
        .collect()
}
