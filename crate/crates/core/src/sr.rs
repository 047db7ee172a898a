//! End-to-end super-resolution: inference with overlap averaging, training
//! set preparation, self-example SR and PSNR evaluation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, RgbImage, YCbCr};
use crate::metrics;
use crate::model::DeepAmModel;
use crate::noise::add_gaussian_noise;
use crate::patches::{self, PatchDataset, PatchGeometry};
use crate::resize;
use crate::train::{self, ArchSpec, BatchSchedule, TrainConfig, TrainReport};

/// Patches pushed through the model at once during inference.
const INFERENCE_CHUNK: usize = 8192;

/// Image file extensions picked up from directories.
/// Mean-removed LR patches below this (relative to the image range) count
/// as carrying no detail.
const FLAT_PATCH_TOL: f64 = 1e-12;

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "bmp", "tif", "tiff", "pgm"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrOptions {
    /// LR patch stride; 1 is full overlap.
    pub stride: usize,
    /// Noise level of the input. Rescales a noise-trained model's
    /// first-layer thresholds when set.
    pub sigma_t: Option<f64>,
}

impl Default for SrOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            sigma_t: None,
        }
    }
}

/// Matlab-compatible bicubic upscaling by the model's integer factor.
pub fn bicubic_upscale(lr: &GrayImage, scale: usize) -> Result<GrayImage> {
    resize::upscale(lr, scale)
}

/// Super-resolves a luminance image. Pixels not covered by any patch crop
/// (the image border) keep the bicubic estimate.
pub fn super_resolve(model: &DeepAmModel, lr: &GrayImage, opts: &SrOptions) -> Result<GrayImage> {
    let rescaled;
    let model = match opts.sigma_t {
        Some(sigma_t) => {
            rescaled = model.rescale_for_noise(sigma_t)?;
            &rescaled
        }
        None => model,
    };
    let geom = &model.geometry;
    if model.input_dim() != geom.lr_dim() || model.output_dim() != geom.hr_dim() {
        return Err(Error::dims(format!(
            "model maps {} -> {} but its geometry implies {} -> {}",
            model.input_dim(),
            model.output_dim(),
            geom.lr_dim(),
            geom.hr_dim()
        )));
    }
    let fill = bicubic_upscale(lr, geom.scale)?;
    let (x0, means, positions) = patches::extract_lr_patches(lr, geom, opts.stride)?;
    let n = x0.ncols();
    let mut crops = DMatrix::zeros(geom.crop_side * geom.crop_side, n);
    let hs = geom.hr_side();
    let off = geom.crop_offset();
    let cs = geom.crop_side;
    let mut start = 0;
    while start < n {
        let len = INFERENCE_CHUNK.min(n - start);
        let out = model.forward_batch(&x0.columns(start, len).into_owned())?;
        for k in 0..len {
            let src = out.column(k);
            let mut dst = crops.column_mut(start + k);
            for i in 0..cs {
                for j in 0..cs {
                    dst[i * cs + j] = src[(off + i) * hs + off + j];
                }
            }
        }
        start += len;
    }
    if crops.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("model produced non-finite pixels".into()));
    }
    patches::reconstruct(&crops, &means, &positions, geom, fill.dims(), &fill)
}

/// Colour-aware SR: luminance through the model, chroma bicubically.
pub fn super_resolve_rgb(model: &DeepAmModel, lr: &RgbImage, opts: &SrOptions) -> Result<RgbImage> {
    if lr.is_gray() {
        let y = GrayImage::from_u8(lr.height, lr.width, &lr.data)?;
        let out = super_resolve(model, &y, opts)?;
        let (h, w) = out.dims();
        return RgbImage::new(h, w, 1, out.to_u8());
    }
    let ycc = YCbCr::from_rgb(lr)?;
    let s = model.geometry.scale;
    YCbCr {
        y: super_resolve(model, &ycc.y, opts)?,
        cb: bicubic_upscale(&ycc.cb, s)?,
        cr: bicubic_upscale(&ycc.cr, s)?,
    }
    .to_rgb()
}

/// Sorted image files directly inside `dir`.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let context = |e: std::io::Error| std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()));
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(context)? {
        let path = entry?.path();
        let ok = path.is_file()
            && path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if ok {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Loads every image in `dir` as (file stem, 8-bit luminance).
pub fn load_luminance_dir(dir: &Path) -> Result<Vec<(String, GrayImage)>> {
    let files = list_images(dir)?;
    if files.is_empty() {
        return Err(Error::degenerate(format!("no images in {}", dir.display())));
    }
    files
        .iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, ground_truth(&GrayImage::load(p)?)))
        })
        .collect()
}

/// Luminance as stored by 8-bit benchmark pipelines.
pub fn ground_truth(y: &GrayImage) -> GrayImage {
    y.quantized()
}

/// Pools training pairs from HR images: each is modcropped and bicubically
/// downscaled; with `sigma_n > 0` the LR image gets Gaussian noise (seeded
/// per image) while the HR targets stay clean.
pub fn prepare_training_set(
    images: &[GrayImage],
    geom: &PatchGeometry,
    stride: usize,
    sigma_n: f64,
    seed: u64,
) -> Result<PatchDataset> {
    if images.is_empty() {
        return Err(Error::degenerate("no training images"));
    }
    let mut parts = Vec::with_capacity(images.len());
    for (k, img) in images.iter().enumerate() {
        let hr = img.modcrop(geom.scale)?;
        let lr = resize::downscale(&hr, geom.scale)?;
        let lr = add_gaussian_noise(&lr, sigma_n, seed.wrapping_add(k as u64))?;
        match patches::pairs_from(&lr, &hr, geom, stride) {
            Ok(p) => parts.push(p),
            Err(Error::DegenerateData(msg)) => warn!("skipping training image {k}: {msg}"),
            Err(e) => return Err(e),
        }
    }
    if parts.is_empty() {
        return Err(Error::degenerate("no training image is large enough for a patch"));
    }
    PatchDataset::concat(&parts)
}

/// Uniformly subsamples at most `max` pairs (deterministic in `seed`).
pub fn subsample(data: &PatchDataset, max: usize, seed: u64) -> PatchDataset {
    use rand::seq::index::sample;
    use rand::SeedableRng;
    if data.len() <= max {
        return data.clone();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, data.len(), max).into_vec();
    idx.sort_unstable();
    data.select(&idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSrConfig {
    pub train: TrainConfig,
    /// Stride for the self-example training pairs.
    pub train_stride: usize,
    pub sr: SrOptions,
}

impl Default for SelfSrConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                schedule: BatchSchedule {
                    iters_per_batch: 5000,
                    ..BatchSchedule::single_batch()
                },
                ..TrainConfig::default()
            },
            train_stride: 1,
            sr: SrOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelfSrOutcome {
    pub image: GrayImage,
    pub model: DeepAmModel,
    pub report: TrainReport,
    /// The input had no LR detail, so the linear model was used instead.
    pub used_linear_fallback: bool,
}

/// Trains a throwaway model on (downscaled `lr`, `lr`) pairs and applies it
/// to `lr`.
pub fn self_example_sr(
    lr: &GrayImage,
    geom: &PatchGeometry,
    config: &SelfSrConfig,
) -> Result<SelfSrOutcome> {
    let min_side = 4 * geom.lr_side;
    if lr.height() < min_side || lr.width() < min_side {
        return Err(Error::degenerate(format!(
            "self-example SR needs at least {min_side}x{min_side} pixels, got {}x{}",
            lr.height(),
            lr.width()
        )));
    }
    let data = patches::extract_pairs(lr, geom, config.train_stride)?;
    // Resampling round-off leaves ~1e-17 ripples on a constant input.
    let scale = lr.pixels().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let flat = data.x0.iter().all(|v| v.abs() <= FLAT_PATCH_TOL * scale);
    let mut train_cfg = config.train.clone();
    if flat && train_cfg.arch.depth() > 0 {
        warn!("input has no patch detail; falling back to the linear model");
        train_cfg.arch = ArchSpec::linear();
    }
    info!("self-example training on {} pairs", data.len());
    let (model, report) = train::train(&data, geom, &train_cfg)?;
    let image = super_resolve(&model, lr, &config.sr)?;
    Ok(SelfSrOutcome {
        image,
        model,
        report,
        used_linear_fallback: flat && config.train.arch.depth() > 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub stride: usize,
    /// Border pixels excluded from PSNR.
    pub shave: usize,
    /// Noise added to the LR inputs.
    pub sigma_t: f64,
    pub noise_seed: u64,
    /// Rescale a noise-trained model's thresholds to `sigma_t`.
    pub rescale: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            shave: 0,
            sigma_t: 0.0,
            noise_seed: 0,
            rescale: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub name: String,
    pub bicubic_psnr: f64,
    pub model_psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn mean_bicubic(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.bicubic_psnr))
    }

    pub fn mean_model(&self) -> Option<f64> {
        let v: Option<Vec<f64>> = self.rows.iter().map(|r| r.model_psnr).collect();
        v.filter(|v| !v.is_empty()).map(|v| mean(v.into_iter()))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("image,bicubic_psnr,model_psnr\n");
        let cell = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.4},{}", r.name, r.bicubic_psnr, cell(r.model_psnr));
        }
        let _ = writeln!(s, "average,{:.4},{}", self.mean_bicubic(), cell(self.mean_model()));
        s
    }

    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain(["average".len(), "image".len()])
            .max()
            .unwrap_or(5);
        let cell = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        let mut s = format!("{:<width$}  {:>8}  {:>8}\n", "image", "bicubic", "model");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<width$}  {:>8.2}  {:>8}",
                r.name,
                r.bicubic_psnr,
                cell(r.model_psnr)
            );
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:>8.2}  {:>8}",
            "average",
            self.mean_bicubic(),
            cell(self.mean_model())
        );
        s
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Output of evaluating one image: the degraded input and both estimates,
/// all 8-bit quantized exactly as they would be written to disk.
#[derive(Debug, Clone)]
pub struct EvalImages {
    pub name: String,
    pub reference: GrayImage,
    pub lr: GrayImage,
    pub bicubic: GrayImage,
    pub model: Option<GrayImage>,
}

/// Degrades each reference by bicubic downscaling (plus optional noise),
/// restores it bicubically and, if given, with `model`, and scores both
/// against the modcropped reference.
pub fn evaluate(
    model: Option<&DeepAmModel>,
    scale: usize,
    images: &[(String, GrayImage)],
    opts: &EvalOptions,
) -> Result<(EvalReport, Vec<EvalImages>)> {
    if images.is_empty() {
        return Err(Error::degenerate("nothing to evaluate"));
    }
    if let Some(m) = model {
        if m.geometry.scale != scale {
            return Err(Error::invalid(format!(
                "model upscales by {}, evaluation by {scale}",
                m.geometry.scale
            )));
        }
    }
    let sr_opts = SrOptions {
        stride: opts.stride,
        sigma_t: (opts.rescale && model.is_some_and(|m| m.training_noise_sigma > 0.0))
            .then_some(opts.sigma_t),
    };
    let mut rows = Vec::with_capacity(images.len());
    let mut outputs = Vec::with_capacity(images.len());
    for (k, (name, img)) in images.iter().enumerate() {
        let reference = img.modcrop(scale)?;
        let lr = resize::downscale(&reference, scale)?;
        let lr = add_gaussian_noise(&lr, opts.sigma_t, opts.noise_seed.wrapping_add(k as u64))?;
        let bicubic = bicubic_upscale(&lr, scale)?.quantized();
        let bicubic_psnr = metrics::psnr_shaved(&bicubic, &reference, opts.shave)?;
        let (model_img, model_psnr) = match model {
            Some(m) => {
                let out = super_resolve(m, &lr, &sr_opts)?.quantized();
                let p = metrics::psnr_shaved(&out, &reference, opts.shave)?;
                (Some(out), Some(p))
            }
            None => (None, None),
        };
        info!(
            "{name}: bicubic {bicubic_psnr:.2} dB{}",
            model_psnr.map(|p| format!(", model {p:.2} dB")).unwrap_or_default()
        );
        rows.push(EvalRow {
            name: name.clone(),
            bicubic_psnr,
            model_psnr,
        });
        outputs.push(EvalImages {
            name: name.clone(),
            reference,
            lr,
            bicubic,
            model: model_img,
        });
    }
    Ok((EvalReport { rows }, outputs))
}
