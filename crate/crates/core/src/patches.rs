//! Patch pairs for training and overlap-averaged reconstruction for inference.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::resize;

/// LR/HR patch layout. `lr_side` is the LR patch side, `scale` the integer
/// upscaling factor; the model predicts `hr_side()`-sized patches of which
/// only the central `crop_side` square is kept when reconstructing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGeometry {
    pub lr_side: usize,
    pub scale: usize,
    pub crop_side: usize,
    pub stride: usize,
}

impl Default for PatchGeometry {
    fn default() -> Self {
        Self {
            lr_side: 6,
            scale: 2,
            crop_side: 8,
            stride: 1,
        }
    }
}

impl PatchGeometry {
    pub fn new(lr_side: usize, scale: usize, crop_side: usize, stride: usize) -> Result<Self> {
        let g = Self {
            lr_side,
            scale,
            crop_side,
            stride,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr_side == 0 || self.scale == 0 || self.stride == 0 || self.crop_side == 0 {
            return Err(Error::invalid(format!("patch geometry has a zero field: {self:?}")));
        }
        if self.crop_side > self.hr_side() {
            return Err(Error::invalid(format!(
                "crop side {} exceeds HR patch side {}",
                self.crop_side,
                self.hr_side()
            )));
        }
        if (self.hr_side() - self.crop_side) % 2 != 0 {
            return Err(Error::invalid("crop must be centred on whole pixels"));
        }
        Ok(())
    }

    #[inline]
    pub fn hr_side(&self) -> usize {
        self.lr_side * self.scale
    }

    /// Dimension of an LR patch vector.
    #[inline]
    pub fn lr_dim(&self) -> usize {
        self.lr_side * self.lr_side
    }

    /// Dimension of an HR patch vector.
    #[inline]
    pub fn hr_dim(&self) -> usize {
        self.hr_side() * self.hr_side()
    }

    #[inline]
    pub fn crop_offset(&self) -> usize {
        (self.hr_side() - self.crop_side) / 2
    }
}

/// Paired mean-removed patches, one column per sample.
#[derive(Debug, Clone)]
pub struct PatchDataset {
    /// LR patches, `lr_dim x N`.
    pub x0: DMatrix<f64>,
    /// HR patches minus the LR patch mean, `hr_dim x N`.
    pub y: DMatrix<f64>,
    pub lr_means: Vec<f64>,
    /// Top-left corner of each LR patch.
    pub positions: Vec<(usize, usize)>,
}

impl PatchDataset {
    pub fn len(&self) -> usize {
        self.x0.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.ncols() == 0
    }

    /// Concatenates datasets column-wise.
    pub fn concat(parts: &[PatchDataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("no datasets to concatenate"))?;
        let (d0, dy) = (first.x0.nrows(), first.y.nrows());
        if parts.iter().any(|p| p.x0.nrows() != d0 || p.y.nrows() != dy) {
            return Err(Error::dims("patch dimensions differ between datasets"));
        }
        let n: usize = parts.iter().map(|p| p.len()).sum();
        let mut x0 = DMatrix::zeros(d0, n);
        let mut y = DMatrix::zeros(dy, n);
        let mut lr_means = Vec::with_capacity(n);
        let mut positions = Vec::with_capacity(n);
        let mut at = 0;
        for p in parts {
            x0.columns_mut(at, p.len()).copy_from(&p.x0);
            y.columns_mut(at, p.len()).copy_from(&p.y);
            lr_means.extend_from_slice(&p.lr_means);
            positions.extend_from_slice(&p.positions);
            at += p.len();
        }
        Ok(Self {
            x0,
            y,
            lr_means,
            positions,
        })
    }

    /// Keeps the listed columns, in order.
    pub fn select(&self, cols: &[usize]) -> Self {
        Self {
            x0: self.x0.select_columns(cols),
            y: self.y.select_columns(cols),
            lr_means: cols.iter().map(|&c| self.lr_means[c]).collect(),
            positions: cols.iter().map(|&c| self.positions[c]).collect(),
        }
    }
}

fn grid_positions(len: usize, side: usize, stride: usize) -> Vec<usize> {
    if len < side {
        return Vec::new();
    }
    (0..=len - side).step_by(stride).collect()
}

/// Mean-removed LR patches of `lr` sampled every `stride` pixels.
pub fn extract_lr_patches(
    lr: &GrayImage,
    geom: &PatchGeometry,
    stride: usize,
) -> Result<(DMatrix<f64>, Vec<f64>, Vec<(usize, usize)>)> {
    geom.validate()?;
    if stride == 0 {
        return Err(Error::invalid("stride must be positive"));
    }
    let p = geom.lr_side;
    let rows = grid_positions(lr.height(), p, stride);
    let cols = grid_positions(lr.width(), p, stride);
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::degenerate(format!(
            "{}x{} LR image is smaller than a {p}x{p} patch",
            lr.height(),
            lr.width()
        )));
    }
    let n = rows.len() * cols.len();
    let mut x = DMatrix::zeros(p * p, n);
    let mut means = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let mut k = 0;
    for &r in &rows {
        for &c in &cols {
            let mut col = x.column_mut(k);
            for i in 0..p {
                for j in 0..p {
                    col[i * p + j] = lr.get(r + i, c + j);
                }
            }
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            means.push(mean);
            positions.push((r, c));
            k += 1;
        }
    }
    Ok((x, means, positions))
}

/// Pairs LR patches of `lr` with the co-located HR patches of `hr`.
///
/// `hr` must be exactly `scale` times the size of `lr`. Both patches have the
/// LR patch mean subtracted so the same scalar restores either one.
pub fn pairs_from(
    lr: &GrayImage,
    hr: &GrayImage,
    geom: &PatchGeometry,
    stride: usize,
) -> Result<PatchDataset> {
    let s = geom.scale;
    if hr.height() != lr.height() * s || hr.width() != lr.width() * s {
        return Err(Error::dims(format!(
            "HR {}x{} is not {s}x LR {}x{}",
            hr.height(),
            hr.width(),
            lr.height(),
            lr.width()
        )));
    }
    let (x0, lr_means, positions) = extract_lr_patches(lr, geom, stride)?;
    let hs = geom.hr_side();
    let mut y = DMatrix::zeros(hs * hs, x0.ncols());
    for (k, (&(r, c), &mean)) in positions.iter().zip(&lr_means).enumerate() {
        let mut col = y.column_mut(k);
        for i in 0..hs {
            for j in 0..hs {
                col[i * hs + j] = hr.get(s * r + i, s * c + j) - mean;
            }
        }
    }
    Ok(PatchDataset {
        x0,
        y,
        lr_means,
        positions,
    })
}

/// Builds training pairs from a ground-truth HR image: modcrop, bicubic
/// downscale by `scale`, then [`pairs_from`].
pub fn extract_pairs(hr: &GrayImage, geom: &PatchGeometry, stride: usize) -> Result<PatchDataset> {
    let hr = hr.modcrop(geom.scale)?;
    let lr = resize::downscale(&hr, geom.scale)?;
    pairs_from(&lr, &hr, geom, stride)
}

/// Overlap-averages predicted HR patches into an image of `out_size`.
///
/// `hr_patches` holds either full `hr_side`² patches (the central crop is
/// taken) or already-cropped `crop_side`² patches. Each patch gets its LR
/// mean added back; pixels covered by no crop are copied from `fill`.
pub fn reconstruct(
    hr_patches: &DMatrix<f64>,
    lr_means: &[f64],
    positions: &[(usize, usize)],
    geom: &PatchGeometry,
    out_size: (usize, usize),
    fill: &GrayImage,
) -> Result<GrayImage> {
    geom.validate()?;
    let n = hr_patches.ncols();
    if lr_means.len() != n || positions.len() != n {
        return Err(Error::dims(format!(
            "{n} patches, {} means, {} positions",
            lr_means.len(),
            positions.len()
        )));
    }
    if fill.dims() != out_size {
        return Err(Error::dims(format!(
            "fill image is {:?}, output is {:?}",
            fill.dims(),
            out_size
        )));
    }
    let hs = geom.hr_side();
    let cs = geom.crop_side;
    let (src_side, src_off) = if hr_patches.nrows() == hs * hs {
        (hs, geom.crop_offset())
    } else if hr_patches.nrows() == cs * cs {
        (cs, 0)
    } else {
        return Err(Error::dims(format!(
            "patch length {} matches neither {}x{} nor {}x{}",
            hr_patches.nrows(),
            hs,
            hs,
            cs,
            cs
        )));
    };

    let (h, w) = out_size;
    let mut acc = vec![0.0; h * w];
    let mut count = vec![0u32; h * w];
    let off = geom.crop_offset();
    for (k, (&(r, c), &mean)) in positions.iter().zip(lr_means).enumerate() {
        let top = geom.scale * r + off;
        let left = geom.scale * c + off;
        if top + cs > h || left + cs > w {
            return Err(Error::dims(format!(
                "patch {k} at LR ({r},{c}) lands outside the {h}x{w} output"
            )));
        }
        let col = hr_patches.column(k);
        for i in 0..cs {
            for j in 0..cs {
                let v = col[(src_off + i) * src_side + src_off + j] + mean;
                let at = (top + i) * w + left + j;
                acc[at] += v;
                count[at] += 1;
            }
        }
    }
    let pixels = acc
        .iter()
        .zip(&count)
        .zip(fill.pixels())
        .map(|((&a, &n), &f)| if n == 0 { f } else { a / n as f64 })
        .collect();
    GrayImage::new(h, w, pixels)
}

/// Fraction of output pixels covered by at least one crop.
pub fn coverage_mask(
    positions: &[(usize, usize)],
    geom: &PatchGeometry,
    out_size: (usize, usize),
) -> Vec<bool> {
    let (h, w) = out_size;
    let mut mask = vec![false; h * w];
    let off = geom.crop_offset();
    for &(r, c) in positions {
        let top = geom.scale * r + off;
        let left = geom.scale * c + off;
        for i in top..(top + geom.crop_side).min(h) {
            for j in left..(left + geom.crop_side).min(w) {
                mask[i * w + j] = true;
            }
        }
    }
    mask
}
