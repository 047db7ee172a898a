//! Deep analysis model: a cascade of analysis dictionaries with
//! soft-thresholding followed by one synthesis dictionary.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::linalg;
use crate::manifold::soft_threshold_rows;
use crate::patches::PatchGeometry;
use crate::resize;

/// Allowed deviation of an analysis atom's norm from 1.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// One analysis layer. The first `ipad_atoms` rows of `omega` are
/// information-preserving atoms, the remainder clustering atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisLayer {
    pub omega: DMatrix<f64>,
    pub lambda: Vec<f64>,
    pub ipad_atoms: usize,
}

impl AnalysisLayer {
    pub fn new(omega: DMatrix<f64>, lambda: Vec<f64>, ipad_atoms: usize) -> Result<Self> {
        let layer = Self {
            omega,
            lambda,
            ipad_atoms,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.len() != self.omega.nrows() {
            return Err(Error::dims(format!(
                "{} thresholds for {} atoms",
                self.lambda.len(),
                self.omega.nrows()
            )));
        }
        if self.ipad_atoms > self.omega.nrows() {
            return Err(Error::dims("IPAD block larger than the dictionary"));
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::invalid("thresholds must be finite and non-negative"));
        }
        if let Some(r) = (0..self.omega.nrows()).find(|&r| (self.omega.row(r).norm() - 1.0).abs() > UNIT_NORM_TOL) {
            return Err(Error::invalid(format!(
                "atom {r} has norm {}, expected 1",
                self.omega.row(r).norm()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn d_in(&self) -> usize {
        self.omega.ncols()
    }

    #[inline]
    pub fn d_out(&self) -> usize {
        self.omega.nrows()
    }

    pub fn cad_atoms(&self) -> usize {
        self.d_out() - self.ipad_atoms
    }

    /// `S_λ(Ω x)` column-wise.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = linalg::mul(&self.omega, x);
        soft_threshold_rows(&mut a, &self.lambda);
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepAmModel {
    pub layers: Vec<AnalysisLayer>,
    /// `d_{L+1} x d_L`.
    pub synthesis: DMatrix<f64>,
    pub geometry: PatchGeometry,
    /// Noise level of the training inputs (0 for clean training).
    pub training_noise_sigma: f64,
}

impl DeepAmModel {
    pub fn new(
        layers: Vec<AnalysisLayer>,
        synthesis: DMatrix<f64>,
        geometry: PatchGeometry,
        training_noise_sigma: f64,
    ) -> Result<Self> {
        let m = Self {
            layers,
            synthesis,
            geometry,
            training_noise_sigma,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.training_noise_sigma >= 0.0) || !self.training_noise_sigma.is_finite() {
            return Err(Error::invalid("training noise sigma must be finite and >= 0"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if i > 0 && layer.d_in() != self.layers[i - 1].d_out() {
                return Err(Error::dims(format!(
                    "layer {} takes {} inputs but layer {} emits {}",
                    i + 1,
                    layer.d_in(),
                    i,
                    self.layers[i - 1].d_out()
                )));
            }
        }
        let feat = self.feature_dim();
        if self.synthesis.ncols() != feat {
            return Err(Error::dims(format!(
                "synthesis dictionary has {} columns, features have {feat}",
                self.synthesis.ncols()
            )));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Input dimension `d_0`. For a layer-free model this is the synthesis
    /// column count.
    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map(|l| l.d_in())
            .unwrap_or(self.synthesis.ncols())
    }

    pub fn output_dim(&self) -> usize {
        self.synthesis.nrows()
    }

    fn feature_dim(&self) -> usize {
        self.layers
            .last()
            .map(|l| l.d_out())
            .unwrap_or_else(|| self.synthesis.ncols())
    }

    /// Features `X^L` for a batch of inputs (one per column).
    pub fn features(&self, x0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x0.nrows() != self.input_dim() {
            return Err(Error::dims(format!(
                "input has {} rows, model expects {}",
                x0.nrows(),
                self.input_dim()
            )));
        }
        let mut x = x0.clone();
        for layer in &self.layers {
            x = layer.apply(&x);
        }
        Ok(x)
    }

    /// `D·S_{λ_L}(Ω_L ⋯ S_{λ_1}(Ω_1 x))` column-wise.
    pub fn forward_batch(&self, x0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(linalg::mul(&self.synthesis, &self.features(x0)?))
    }

    pub fn forward(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let x = DMatrix::from_column_slice(x0.len(), 1, x0);
        Ok(self.forward_batch(&x)?.column(0).iter().copied().collect())
    }

    /// Per layer, the fraction of samples whose coefficient survives
    /// thresholding for each atom.
    pub fn survivor_fractions(&self, x0: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
        if x0.nrows() != self.input_dim() {
            return Err(Error::dims("input dimension mismatch"));
        }
        let n = x0.ncols().max(1) as f64;
        let mut x = x0.clone();
        let mut out = Vec::with_capacity(self.depth());
        for layer in &self.layers {
            x = layer.apply(&x);
            out.push(
                (0..x.nrows())
                    .map(|j| x.row(j).iter().filter(|v| **v != 0.0).count() as f64 / n)
                    .collect(),
            );
        }
        Ok(out)
    }

    /// Rescales first-layer thresholds for test noise `sigma_t`: IPAD by
    /// `(σ_T/σ_N)²`, CAD by `σ_T/σ_N`.
    pub fn rescale_for_noise(&self, sigma_t: f64) -> Result<Self> {
        if self.training_noise_sigma == 0.0 {
            return Err(Error::invalid(
                "threshold rescaling needs a model trained on noisy inputs",
            ));
        }
        if !(sigma_t >= 0.0) || !sigma_t.is_finite() {
            return Err(Error::invalid(format!("test noise sigma must be >= 0, got {sigma_t}")));
        }
        let mut out = self.clone();
        if sigma_t == self.training_noise_sigma {
            return Ok(out);
        }
        let ratio = sigma_t / self.training_noise_sigma;
        if let Some(first) = out.layers.first_mut() {
            let split = first.ipad_atoms;
            for (j, l) in first.lambda.iter_mut().enumerate() {
                *l *= if j < split { ratio * ratio } else { ratio };
            }
        }
        Ok(out)
    }

    /// Exports the equivalent rectifier network: `S_λ(a) = ReLU(a−λ) − ReLU(−a−λ)`.
    pub fn to_relu_network(&self) -> ReluNetwork {
        let mut layers = Vec::with_capacity(self.depth());
        for (i, layer) in self.layers.iter().enumerate() {
            let (d, n) = layer.omega.shape();
            // Input is either x0 (first layer) or [r⁺; r⁻] with x = r⁺ − r⁻.
            let signed_in = i > 0;
            let cols = if signed_in { 2 * n } else { n };
            let mut w = DMatrix::zeros(2 * d, cols);
            for r in 0..d {
                for c in 0..n {
                    let v = layer.omega[(r, c)];
                    w[(r, c)] = v;
                    w[(d + r, c)] = -v;
                    if signed_in {
                        w[(r, n + c)] = -v;
                        w[(d + r, n + c)] = v;
                    }
                }
            }
            let bias = DVector::from_iterator(
                2 * d,
                layer.lambda.iter().chain(layer.lambda.iter()).map(|l| -l),
            );
            layers.push(ReluLayer { weight: w, bias });
        }
        let output = if self.layers.is_empty() {
            self.synthesis.clone()
        } else {
            let (h, d) = self.synthesis.shape();
            let mut out = DMatrix::zeros(h, 2 * d);
            out.columns_mut(0, d).copy_from(&self.synthesis);
            out.columns_mut(d, d).copy_from(&(-&self.synthesis));
            out
        };
        ReluNetwork { layers, output }
    }
}

/// Affine layer followed by `max(·, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluLayer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Feed-forward rectifier network with a linear read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    pub layers: Vec<ReluLayer>,
    pub output: DMatrix<f64>,
}

impl ReluNetwork {
    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map(|l| l.weight.ncols())
            .unwrap_or(self.output.ncols())
    }

    pub fn forward_batch(&self, x0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x0.nrows() != self.input_dim() {
            return Err(Error::dims("input dimension mismatch"));
        }
        let mut x = x0.clone();
        for layer in &self.layers {
            let mut a = linalg::mul(&layer.weight, &x);
            for mut col in a.column_iter_mut() {
                col += &layer.bias;
                col.apply(|v| *v = v.max(0.0));
            }
            x = a;
        }
        Ok(linalg::mul(&self.output, &x))
    }

    pub fn forward(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let x = DMatrix::from_column_slice(x0.len(), 1, x0);
        Ok(self.forward_batch(&x)?.column(0).iter().copied().collect())
    }
}

/// Normalized inner product between an analysis atom's HR back-projection and
/// its synthesis atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomCorrelation {
    pub atom: usize,
    pub ipad: bool,
    pub value: f64,
}

/// Bicubic degradation as a matrix: column `k` is the downscaled `k`-th
/// canonical HR patch, vectorized row-major.
pub fn degradation_matrix(geom: &PatchGeometry) -> Result<DMatrix<f64>> {
    let hs = geom.hr_side();
    let mut h = DMatrix::zeros(geom.lr_dim(), geom.hr_dim());
    for k in 0..geom.hr_dim() {
        let basis = GrayImage::from_fn(hs, hs, |r, c| if r * hs + c == k { 1.0 } else { 0.0 })?;
        let lr = resize::downscale(&basis, geom.scale)?;
        if lr.pixels().len() != geom.lr_dim() {
            return Err(Error::dims("downscaled patch has unexpected size"));
        }
        for (i, v) in lr.pixels().iter().enumerate() {
            h[(i, k)] = *v;
        }
    }
    Ok(h)
}

/// For a single-layer model, `⟨H†ω_j, d_j⟩ / (‖H†ω_j‖‖d_j‖)` per atom.
pub fn atom_correlation_diagnostic(model: &DeepAmModel) -> Result<Vec<AtomCorrelation>> {
    if model.depth() != 1 {
        return Err(Error::invalid(format!(
            "atom correlation is defined for single-layer models, got {} layers",
            model.depth()
        )));
    }
    let geom = &model.geometry;
    let layer = &model.layers[0];
    if layer.d_in() != geom.lr_dim() || model.output_dim() != geom.hr_dim() {
        return Err(Error::dims("model dimensions do not match its patch geometry"));
    }
    let hpinv = linalg::pseudo_inverse(&degradation_matrix(geom)?, 1e-10)?;
    let back = linalg::mul_bt(&hpinv, &layer.omega); // hr_dim x d_1
    Ok((0..layer.d_out())
        .map(|j| {
            let v = back.column(j);
            let d = model.synthesis.column(j);
            let denom = v.norm() * d.norm();
            let value = if denom > 0.0 {
                (v.dot(&d) / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            AtomCorrelation {
                atom: j,
                ipad: j < layer.ipad_atoms,
                value,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipad::gaussian_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_model(dims: &[usize], out: usize, seed: u64) -> DeepAmModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let mut omega = gaussian_matrix(w[1], w[0], &mut rng);
            linalg::normalize_rows(&mut omega, 0.0);
            let lambda = (0..w[1]).map(|j| 0.1 * (j % 3) as f64).collect();
            layers.push(AnalysisLayer::new(omega, lambda, w[1] / 2).unwrap());
        }
        let synthesis = gaussian_matrix(out, *dims.last().unwrap(), &mut rng);
        DeepAmModel::new(layers, synthesis, PatchGeometry::default(), 0.1).unwrap()
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let m = random_model(&[4, 6, 5], 3, 1);
        assert_eq!(m.forward(&[0.0; 4]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn unthresholded_single_layer_is_linear() {
        let mut m = random_model(&[4, 6], 3, 2);
        m.layers[0].lambda = vec![0.0; 6];
        let x = [0.3, -1.0, 0.2, 0.7];
        let expected = &m.synthesis * &m.layers[0].omega * DVector::from_column_slice(&x);
        let y = m.forward(&x).unwrap();
        for (a, b) in y.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_export_shape() {
        let m = random_model(&[4, 6, 5, 7], 3, 3);
        let net = m.to_relu_network();
        assert_eq!(net.layers.len(), 3);
        for (layer, d) in net.layers.iter().zip([6, 5, 7]) {
            assert_eq!(layer.weight.nrows(), 2 * d);
        }
        assert_eq!(net.output.shape(), (3, 14));
    }

    #[test]
    fn chain_violation_rejected() {
        let m = random_model(&[4, 6], 3, 4);
        let bad = AnalysisLayer::new(DMatrix::identity(2, 5), vec![0.0; 2], 0).unwrap();
        let r = DeepAmModel::new(
            vec![m.layers[0].clone(), bad],
            DMatrix::zeros(3, 2),
            PatchGeometry::default(),
            0.0,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rescaling_factors() {
        let m = random_model(&[4, 6, 5], 3, 5);
        assert_eq!(m.rescale_for_noise(0.1).unwrap(), m);
        let r = m.rescale_for_noise(0.2).unwrap();
        let split = m.layers[0].ipad_atoms;
        for j in 0..6 {
            let f = if j < split { 4.0 } else { 2.0 };
            assert!((r.layers[0].lambda[j] - f * m.layers[0].lambda[j]).abs() < 1e-15);
        }
        assert_eq!(r.layers[1], m.layers[1]);
        let z = m.rescale_for_noise(0.0).unwrap();
        assert!(z.layers[0].lambda.iter().all(|l| *l == 0.0));
        let mut clean = m.clone();
        clean.training_noise_sigma = 0.0;
        assert!(clean.rescale_for_noise(0.1).is_err());
    }

    #[test]
    fn degradation_preserves_constants() {
        let g = PatchGeometry::default();
        let h = degradation_matrix(&g).unwrap();
        let ones = DVector::from_element(g.hr_dim(), 1.0);
        let lr = &h * ones;
        assert!(lr.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn correlation_of_parallel_and_orthogonal_atoms() {
        let g = PatchGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut omega = gaussian_matrix(2, g.lr_dim(), &mut rng);
        linalg::normalize_rows(&mut omega, 0.0);
        let hpinv = linalg::pseudo_inverse(&degradation_matrix(&g).unwrap(), 1e-10).unwrap();
        let v0 = &hpinv * omega.row(0).transpose();
        let v1 = &hpinv * omega.row(1).transpose();
        // d0 ∥ H†ω0; d1 ⟂ H†ω1
        let mut d1 = gaussian_matrix(g.hr_dim(), 1, &mut rng).column(0).into_owned();
        d1 -= &v1 * (v1.dot(&d1) / v1.norm_squared());
        let mut synthesis = DMatrix::zeros(g.hr_dim(), 2);
        synthesis.set_column(0, &(&v0 * 3.0));
        synthesis.set_column(1, &d1);
        let layer = AnalysisLayer::new(omega, vec![0.0, 0.0], 1).unwrap();
        let m = DeepAmModel::new(vec![layer], synthesis, g, 0.0).unwrap();
        let c = atom_correlation_diagnostic(&m).unwrap();
        assert!((c[0].value - 1.0).abs() < 1e-12);
        assert!(c[1].value.abs() < 1e-12);
        assert!(c[0].ipad && !c[1].ipad);
    }

    #[test]
    fn correlation_rejects_deep_models() {
        let m = random_model(&[36, 8, 8], 144, 7);
        assert!(atom_correlation_diagnostic(&m).is_err());
    }
}
