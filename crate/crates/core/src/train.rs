//! Layer-wise DeepAM training: for every layer learn the IPAD, its
//! thresholds, the CAD and its thresholds, propagate the features, and
//! finish with a least-squares synthesis dictionary.

use std::fmt;
use std::str::FromStr;

use log::{debug, info, warn};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cad::{ipad_residual, layer_synthesis, learn_psi, reparam_cad, search_rho_cad};
use crate::error::{Error, Result};
use crate::ipad::{gaussian_matrix, learn_ipad, search_rho_ipad, DEFAULT_RANK_TOL};
use crate::linalg;
use crate::manifold::{GoalPlusConfig, OptimizeReport, SubspaceBasis};
use crate::model::{AnalysisLayer, DeepAmModel};
use crate::patches::{PatchDataset, PatchGeometry};
use crate::thresholds::{estimate_sigmas, ThresholdSearch, ThresholdSearchGrid};

/// Atom budget of one layer. `ipad: None` picks the default split: the
/// numerical rank `K` of the LR patches, or `3K` in a noisy first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub atoms: usize,
    pub ipad: Option<usize>,
}

/// Per-layer atom budgets, written `"256:35,256:35"` or `"256,256"` (default
/// IPAD split); `"none"` or `""` is the linear model.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ArchSpec {
    pub layers: Vec<LayerSpec>,
}

impl ArchSpec {
    pub fn uniform(depth: usize, atoms: usize) -> Self {
        Self {
            layers: vec![LayerSpec { atoms, ipad: None }; depth],
        }
    }

    pub fn linear() -> Self {
        Self::default()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

impl FromStr for ArchSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") || s == "0" {
            return Ok(Self::linear());
        }
        let parse = |t: &str| -> Result<usize> {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad number {t:?} in architecture {s:?}")))
        };
        let mut layers = Vec::new();
        for part in s.split(',') {
            let spec = match part.split_once(':') {
                Some((a, i)) => LayerSpec {
                    atoms: parse(a)?,
                    ipad: Some(parse(i)?),
                },
                None => LayerSpec {
                    atoms: parse(part)?,
                    ipad: None,
                },
            };
            if spec.atoms == 0 {
                return Err(Error::invalid("a layer needs at least one atom"));
            }
            if spec.ipad.is_some_and(|i| i > spec.atoms) {
                return Err(Error::invalid(format!(
                    "IPAD count exceeds layer size in {part:?}"
                )));
            }
            layers.push(spec);
        }
        Ok(Self { layers })
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.layers.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self
            .layers
            .iter()
            .map(|l| match l.ipad {
                Some(i) => format!("{}:{i}", l.atoms),
                None => l.atoms.to_string(),
            })
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// How the patch pool is fed to the dictionary learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSchedule {
    /// Upper bound on the batch size; the pool size is used if smaller.
    pub batch_size: usize,
    pub batches: usize,
    pub iters_per_batch: usize,
    /// Re-run the threshold searches after every batch instead of once at
    /// the end. The final thresholds are the same either way; this only adds
    /// per-batch diagnostics to the report.
    pub thresholds_every_batch: bool,
}

impl Default for BatchSchedule {
    fn default() -> Self {
        Self {
            batch_size: 40_000,
            batches: 15,
            iters_per_batch: 100,
            thresholds_every_batch: false,
        }
    }
}

impl BatchSchedule {
    /// One batch over the whole pool with 500 iterations.
    pub fn single_batch() -> Self {
        Self {
            batch_size: usize::MAX,
            batches: 1,
            iters_per_batch: 500,
            thresholds_every_batch: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.batches == 0 {
            return Err(Error::invalid("batch size and batch count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: ArchSpec,
    pub schedule: BatchSchedule,
    pub grid: ThresholdSearchGrid,
    pub seed: u64,
    /// Relative singular-value cut-off for numerical rank.
    pub rank_tol: f64,
    /// Noise level of the training inputs, recorded in the model.
    pub training_noise_sigma: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: ArchSpec::uniform(3, 256),
            schedule: BatchSchedule::default(),
            grid: ThresholdSearchGrid::default(),
            seed: 0,
            rank_tol: DEFAULT_RANK_TOL,
            training_noise_sigma: 0.0,
        }
    }
}

/// Per-batch dictionary-learning outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchReport {
    pub samples: usize,
    pub ipad: OptimizeReport,
    pub cad: Option<OptimizeReport>,
    /// Only filled when thresholds are searched every batch.
    pub rho_ipad: Option<f64>,
    pub rho_cad: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerReport {
    pub d_in: usize,
    pub ipad_atoms: usize,
    pub cad_atoms: usize,
    /// Rank of the subspace the IPAD was constrained to.
    pub subspace_rank: usize,
    pub batches: Vec<BatchReport>,
    pub ipad_thresholds: ThresholdSearch,
    pub cad_thresholds: Option<ThresholdSearch>,
    /// CAD atoms removed because they vanished after re-parameterization.
    pub dropped_cad_atoms: Vec<usize>,
    /// Fraction of training samples surviving thresholding, per atom.
    pub survivor_fractions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub samples: usize,
    /// Numerical rank of the LR training patches.
    pub lr_rank: usize,
    pub layers: Vec<LayerReport>,
    /// Mean squared error per HR pixel on the training set.
    pub train_mse: f64,
    /// Same for the linear (no-layer) least-squares model.
    pub linear_train_mse: f64,
}

/// `D = Y X_Lᵀ (X_L X_Lᵀ + I)⁻¹`.
pub fn final_synthesis(x_last: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    linalg::ridge_least_squares(x_last, y)
}

/// Sequence of column batches: each pass over the pool is a fresh shuffle,
/// and batches within a pass do not overlap.
struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    size: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    fn new(n: usize, size: usize, rng: ChaCha8Rng) -> Self {
        let mut s = Self {
            order: (0..n).collect(),
            cursor: n,
            size: size.min(n),
            rng,
        };
        s.reshuffle_if_needed();
        s
    }

    fn reshuffle_if_needed(&mut self) {
        if self.cursor + self.size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
    }

    fn next_batch(&mut self) -> Vec<usize> {
        self.reshuffle_if_needed();
        let mut b = self.order[self.cursor..self.cursor + self.size].to_vec();
        self.cursor += self.size;
        // Sorted columns keep the batch matrix cache-friendly; the
        // objective does not depend on column order.
        b.sort_unstable();
        b
    }
}

fn mean_sq_error(pred: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (pred - y).norm_squared() / (y.len().max(1) as f64)
}

fn survivors(z: &DMatrix<f64>) -> Vec<f64> {
    let n = z.ncols().max(1) as f64;
    (0..z.nrows())
        .map(|j| z.row(j).iter().filter(|v| **v != 0.0).count() as f64 / n)
        .collect()
}

struct Thresholds {
    ipad: ThresholdSearch,
    cad: Option<(DMatrix<f64>, Vec<usize>, ThresholdSearch)>,
}

fn learn_thresholds(
    omega_i: &DMatrix<f64>,
    psi: Option<&DMatrix<f64>>,
    xb: &DMatrix<f64>,
    yb: &DMatrix<f64>,
    grid: &ThresholdSearchGrid,
) -> Result<Thresholds> {
    let stats = estimate_sigmas(omega_i, xb)?;
    let ipad = search_rho_ipad(omega_i, xb, yb, &stats, grid)?;
    let cad = match psi {
        None => None,
        Some(psi) => {
            let synthesis = layer_synthesis(xb, yb)?;
            let residual = ipad_residual(omega_i, &ipad.lambda, xb, yb)?;
            let (omega_c, dropped) = reparam_cad(psi, &synthesis.map)?;
            let stats_c = estimate_sigmas(&omega_c, xb)?;
            let search = search_rho_cad(&omega_c, xb, &residual, &stats_c, grid)?;
            Some((omega_c, dropped, search))
        }
    };
    Ok(Thresholds { ipad, cad })
}

/// Trains a DeepAM on `data`. The IPAD subspace rank is the numerical rank
/// `K` of the LR patches; every layer's IPAD must have at least `K` atoms.
pub fn train(
    data: &PatchDataset,
    geometry: &PatchGeometry,
    config: &TrainConfig,
) -> Result<(DeepAmModel, TrainReport)> {
    config.schedule.validate()?;
    geometry.validate()?;
    if data.is_empty() {
        return Err(Error::degenerate("no training patches"));
    }
    if data.x0.nrows() != geometry.lr_dim() || data.y.nrows() != geometry.hr_dim() {
        return Err(Error::dims(format!(
            "patches are {}/{}-dimensional, geometry expects {}/{}",
            data.x0.nrows(),
            data.y.nrows(),
            geometry.lr_dim(),
            geometry.hr_dim()
        )));
    }
    if !(config.training_noise_sigma >= 0.0) || !config.training_noise_sigma.is_finite() {
        return Err(Error::invalid("training noise sigma must be finite and >= 0"));
    }

    let y = &data.y;
    let n = data.len();
    let linear_map = final_synthesis(&data.x0, y)?;
    let linear_train_mse = mean_sq_error(&linalg::mul(&linear_map, &data.x0), y);

    let lr_basis = SubspaceBasis::from_data(&data.x0, config.rank_tol)?;
    let k0 = lr_basis.rank();
    info!("{n} training pairs, LR patch rank {k0}");

    // Resolve and check the atom split before any optimization.
    let noisy = config.training_noise_sigma > 0.0;
    let mut splits = Vec::with_capacity(config.arch.depth());
    for (i, spec) in config.arch.layers.iter().enumerate() {
        let default = if i == 0 && noisy { 3 * k0 } else { k0 };
        let ipad = spec.ipad.unwrap_or(default.min(spec.atoms));
        if ipad < k0 {
            return Err(Error::degenerate(format!(
                "layer {} has {ipad} IPAD atoms but the LR patches have rank {k0}",
                i + 1
            )));
        }
        splits.push((spec.atoms, ipad));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = data.x0.clone();
    let mut layers = Vec::new();
    let mut layer_reports = Vec::new();

    for (li, &(atoms, d_ipad)) in splits.iter().enumerate() {
        let d_in = x.nrows();
        let d_cad = atoms - d_ipad;
        info!("layer {}: {d_in} -> {atoms} atoms ({d_ipad} IPAD, {d_cad} CAD)", li + 1);

        let ipad_cfg = GoalPlusConfig::ipad(d_in, d_ipad).with_iters(config.schedule.iters_per_batch);
        let cad_cfg = GoalPlusConfig::cad(d_in, d_cad).with_iters(config.schedule.iters_per_batch);
        let mut omega_i = gaussian_matrix(d_ipad, d_in, &mut rng);
        let mut psi = (d_cad > 0).then(|| gaussian_matrix(d_cad, y.nrows(), &mut rng));
        let mut sampler = BatchSampler::new(n, config.schedule.batch_size, ChaCha8Rng::from_rng(&mut rng));

        let mut batch_reports = Vec::new();
        let mut last = None;
        let mut subspace_rank = 0;
        for b in 0..config.schedule.batches {
            let idx = sampler.next_batch();
            let (xb, yb) = if idx.len() == n {
                (x.clone(), y.clone())
            } else {
                (x.select_columns(&idx), y.select_columns(&idx))
            };
            let basis = if li == 0 {
                SubspaceBasis::with_rank(&xb, k0)?
            } else {
                SubspaceBasis::with_rank(&xb, k0.min(d_in))?
            };
            subspace_rank = basis.rank();
            let (oi, ipad_report) = learn_ipad(&xb, d_ipad, &basis, &ipad_cfg, &omega_i)?;
            omega_i = oi;
            debug!(
                "layer {} batch {}: IPAD objective {:.6} -> {:.6} ({:?})",
                li + 1,
                b + 1,
                ipad_report.initial_value(),
                ipad_report.final_value(),
                ipad_report.stop
            );
            let cad_report = match psi.as_ref() {
                Some(p) => {
                    let synthesis = layer_synthesis(&xb, &yb)?;
                    let y_basis = SubspaceBasis::from_data(&yb, config.rank_tol)?;
                    let (p, report) = learn_psi(&synthesis, &y_basis, &cad_cfg, p)?;
                    debug!(
                        "layer {} batch {}: CAD objective {:.6} -> {:.6} ({:?})",
                        li + 1,
                        b + 1,
                        report.initial_value(),
                        report.final_value(),
                        report.stop
                    );
                    psi = Some(p);
                    Some(report)
                }
                None => None,
            };
            let mut br = BatchReport {
                samples: idx.len(),
                ipad: ipad_report,
                cad: cad_report,
                rho_ipad: None,
                rho_cad: None,
            };
            if config.schedule.thresholds_every_batch && b + 1 < config.schedule.batches {
                let t = learn_thresholds(&omega_i, psi.as_ref(), &xb, &yb, &config.grid)?;
                br.rho_ipad = Some(t.ipad.rho);
                br.rho_cad = t.cad.as_ref().map(|c| c.2.rho);
            }
            batch_reports.push(br);
            last = Some((xb, yb));
        }

        let (xb, yb) = last.expect("at least one batch");
        let t = learn_thresholds(&omega_i, psi.as_ref(), &xb, &yb, &config.grid)?;
        if let Some(br) = batch_reports.last_mut() {
            br.rho_ipad = Some(t.ipad.rho);
            br.rho_cad = t.cad.as_ref().map(|c| c.2.rho);
        }
        info!(
            "layer {}: IPAD rho {:e}{}",
            li + 1,
            t.ipad.rho,
            t.cad
                .as_ref()
                .map(|c| format!(", CAD rho {:e}", c.2.rho))
                .unwrap_or_default()
        );

        let mut lambda = t.ipad.lambda.clone();
        let (omega, dropped, cad_search) = match t.cad {
            Some((omega_c, dropped, search)) => {
                lambda.extend_from_slice(&search.lambda);
                let mut omega = DMatrix::zeros(d_ipad + omega_c.nrows(), d_in);
                omega.rows_mut(0, d_ipad).copy_from(&omega_i);
                omega.rows_mut(d_ipad, omega_c.nrows()).copy_from(&omega_c);
                (omega, dropped, Some(search))
            }
            None => (omega_i.clone(), Vec::new(), None),
        };
        if !dropped.is_empty() {
            warn!("layer {}: {} CAD atoms dropped", li + 1, dropped.len());
        }
        let layer = AnalysisLayer::new(omega, lambda, d_ipad)?;
        x = layer.apply(&x);
        let survivor_fractions = survivors(&x);
        layer_reports.push(LayerReport {
            d_in,
            ipad_atoms: d_ipad,
            cad_atoms: layer.cad_atoms(),
            subspace_rank,
            batches: batch_reports,
            ipad_thresholds: t.ipad,
            cad_thresholds: cad_search,
            dropped_cad_atoms: dropped,
            survivor_fractions,
        });
        layers.push(layer);
    }

    let synthesis = if layers.is_empty() {
        linear_map
    } else {
        final_synthesis(&x, y)?
    };
    let train_mse = mean_sq_error(&linalg::mul(&synthesis, &x), y);
    info!("training MSE {train_mse:.3e} (linear model {linear_train_mse:.3e})");
    if synthesis.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("synthesis dictionary is not finite".into()));
    }
    let model = DeepAmModel::new(layers, synthesis, *geometry, config.training_noise_sigma)?;
    Ok((
        model,
        TrainReport {
            config: config.clone(),
            samples: n,
            lr_rank: k0,
            layers: layer_reports,
            train_mse,
            linear_train_mse,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patches::extract_pairs;
    use crate::scenes;

    #[test]
    fn arch_parsing() {
        let a: ArchSpec = "256:35, 128".parse().unwrap();
        assert_eq!(
            a.layers,
            vec![
                LayerSpec { atoms: 256, ipad: Some(35) },
                LayerSpec { atoms: 128, ipad: None }
            ]
        );
        assert_eq!(a.to_string(), "256:35,128");
        assert_eq!("none".parse::<ArchSpec>().unwrap().depth(), 0);
        assert!("10:11".parse::<ArchSpec>().is_err());
        assert!("a,b".parse::<ArchSpec>().is_err());
        assert!("0".parse::<ArchSpec>().unwrap().layers.is_empty());
    }

    #[test]
    fn sampler_covers_pool_without_repeats() {
        let mut s = BatchSampler::new(10, 3, ChaCha8Rng::seed_from_u64(0));
        let mut seen: Vec<usize> = (0..3).flat_map(|_| s.next_batch()).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 9);
        let mut full = BatchSampler::new(5, 100, ChaCha8Rng::seed_from_u64(0));
        assert_eq!(full.next_batch(), vec![0, 1, 2, 3, 4]);
    }

    fn small_data() -> (PatchDataset, PatchGeometry) {
        let geom = PatchGeometry::default();
        let img = scenes::test_scene(48, 48, 3);
        let data = extract_pairs(&img, &geom, 2).unwrap();
        (data, geom)
    }

    #[test]
    fn linear_arch_is_pure_least_squares() {
        let (data, geom) = small_data();
        let cfg = TrainConfig {
            arch: ArchSpec::linear(),
            ..TrainConfig::default()
        };
        let (model, report) = train(&data, &geom, &cfg).unwrap();
        assert_eq!(model.depth(), 0);
        let d = linalg::ridge_least_squares(&data.x0, &data.y).unwrap();
        assert_eq!(model.synthesis, d);
        assert_eq!(report.train_mse, report.linear_train_mse);
    }

    #[test]
    fn undersized_ipad_rejected_up_front() {
        let (data, geom) = small_data();
        let cfg = TrainConfig {
            arch: "40:3".parse().unwrap(),
            ..TrainConfig::default()
        };
        assert!(matches!(train(&data, &geom, &cfg), Err(Error::DegenerateData(_))));
    }
}
