//! Dictionary mosaics: every atom drawn as a small square patch, with the
//! clustering atoms outlined in blue.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::linalg;
use crate::model::DeepAmModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosaicStyle {
    /// Screen pixels per atom pixel.
    pub zoom: usize,
    /// Spacing between tiles (and around the mosaic).
    pub gap: usize,
    pub background: [u8; 3],
    pub marker: [u8; 3],
}

impl Default for MosaicStyle {
    fn default() -> Self {
        Self {
            zoom: 4,
            gap: 2,
            background: [255, 255, 255],
            marker: [0, 0, 255],
        }
    }
}

/// Atoms of layer `layer` (1-based) expressed in the input patch domain:
/// `Ω_layer ⋯ Ω_1`, ignoring the thresholds in between.
pub fn effective_atoms(model: &DeepAmModel, layer: usize) -> Result<DMatrix<f64>> {
    if layer == 0 || layer > model.depth() {
        return Err(Error::invalid(format!(
            "layer {layer} out of range 1..={}",
            model.depth()
        )));
    }
    let mut e = model.layers[0].omega.clone();
    for l in &model.layers[1..layer] {
        e = linalg::mul(&l.omega, &e);
    }
    Ok(e)
}

/// Tile side for atoms of length `len`: the exact square root when there is
/// one, otherwise the smallest square that holds it (zero padded).
pub fn tile_side(len: usize) -> usize {
    let mut s = (len as f64).sqrt().floor() as usize;
    while s * s < len {
        s += 1;
    }
    s.max(1)
}

/// Renders the rows of `atoms` as a grid of patches, each stretched to
/// black..white on its own range. Rows from `first_marked` onwards are
/// outlined with `style.marker`.
pub fn render_atoms(atoms: &DMatrix<f64>, first_marked: usize, style: &MosaicStyle) -> Result<RgbImage> {
    let (count, len) = atoms.shape();
    if count == 0 || len == 0 {
        return Err(Error::invalid("no atoms to render"));
    }
    if style.zoom == 0 {
        return Err(Error::invalid("zoom must be positive"));
    }
    let side = tile_side(len);
    let tile = side * style.zoom;
    let grid_cols = tile_side(count);
    let grid_rows = count.div_ceil(grid_cols);
    let pitch = tile + style.gap;
    let width = style.gap + grid_cols * pitch;
    let height = style.gap + grid_rows * pitch;
    let mut data: Vec<u8> = style.background.iter().copied().cycle().take(width * height * 3).collect();
    let mut put = |y: usize, x: usize, c: [u8; 3]| {
        let at = (y * width + x) * 3;
        data[at..at + 3].copy_from_slice(&c);
    };

    let origin = |k: usize| (style.gap + (k / grid_cols) * pitch, style.gap + (k % grid_cols) * pitch);
    for k in 0..count {
        let row = atoms.row(k);
        let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let (y0, x0) = origin(k);
        for i in 0..side {
            for j in 0..side {
                let idx = i * side + j;
                let v = if idx >= len {
                    0
                } else if hi > lo {
                    ((row[idx] - lo) / (hi - lo) * 255.0).round() as u8
                } else {
                    128
                };
                for dy in 0..style.zoom {
                    for dx in 0..style.zoom {
                        put(y0 + i * style.zoom + dy, x0 + j * style.zoom + dx, [v; 3]);
                    }
                }
            }
        }
    }

    // Outline the union of marked tiles along the gaps.
    if style.gap > 0 {
        let marked = |r: isize, c: isize| -> bool {
            if r < 0 || c < 0 || c as usize >= grid_cols {
                return false;
            }
            let k = r as usize * grid_cols + c as usize;
            k < count && k >= first_marked
        };
        let line = style.gap / 2;
        for k in first_marked..count {
            let (r, c) = ((k / grid_cols) as isize, (k % grid_cols) as isize);
            let (y0, x0) = origin(k);
            // Border rows/cols sit in the gap just outside the tile.
            let top = y0 - style.gap + line;
            let bottom = y0 + tile + line;
            let left = x0 - style.gap + line;
            let right = x0 + tile + line;
            if !marked(r - 1, c) {
                (left..=right).for_each(|x| put(top, x, style.marker));
            }
            if !marked(r + 1, c) {
                (left..=right).for_each(|x| put(bottom, x, style.marker));
            }
            if !marked(r, c - 1) {
                (top..=bottom).for_each(|y| put(y, left, style.marker));
            }
            if !marked(r, c + 1) {
                (top..=bottom).for_each(|y| put(y, right, style.marker));
            }
        }
    }
    RgbImage::new(height, width, 3, data)
}

/// Mosaic of layer `layer` (1-based) of `model` in the LR patch domain.
pub fn render_layer(model: &DeepAmModel, layer: usize, style: &MosaicStyle) -> Result<RgbImage> {
    let atoms = effective_atoms(model, layer)?;
    render_atoms(&atoms, model.layers[layer - 1].ipad_atoms, style)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tile_sides() {
        assert_eq!(tile_side(36), 6);
        assert_eq!(tile_side(37), 7);
        assert_eq!(tile_side(1), 1);
    }

    #[test]
    fn identity_atoms_are_single_bright_pixels() {
        let style = MosaicStyle {
            zoom: 1,
            gap: 2,
            ..MosaicStyle::default()
        };
        let img = render_atoms(&DMatrix::identity(4, 4), 4, &style).unwrap();
        // 2x2 grid of 2x2 tiles with gap 2
        assert_eq!((img.height, img.width), (10, 10));
        let px = |y: usize, x: usize| img.data[(y * img.width + x) * 3];
        for k in 0..4 {
            let (y0, x0) = (2 + (k / 2) * 4, 2 + (k % 2) * 4);
            for idx in 0..4 {
                let v = px(y0 + idx / 2, x0 + idx % 2);
                assert_eq!(v, if idx == k { 255 } else { 0 }, "atom {k} pixel {idx}");
            }
        }
    }

    #[test]
    fn marker_drawn_only_around_marked_atoms() {
        let style = MosaicStyle {
            zoom: 1,
            gap: 2,
            ..MosaicStyle::default()
        };
        let none = render_atoms(&DMatrix::identity(4, 4), 4, &style).unwrap();
        let some = render_atoms(&DMatrix::identity(4, 4), 2, &style).unwrap();
        let blue = |img: &RgbImage| img.data.chunks(3).filter(|p| *p == [0, 0, 255]).count();
        assert_eq!(blue(&none), 0);
        assert!(blue(&some) > 0);
        assert_eq!(render_atoms(&DMatrix::identity(4, 4), 2, &style).unwrap(), some);
    }
}
