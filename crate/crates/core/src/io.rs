//! Binary model container.
//!
//! ```text
//! "DAM1" | version u32 | L u32 | p, s, crop, stride u32×4 | σ_N f64
//! per layer: d_in u32 | d_out u32 | d_ipad u32 | Ω (row-major f64) | λ (f64)
//! rows u32 | cols u32 | D (row-major f64)
//! CRC32 of everything above
//! ```
//!
//! All integers and floats are little-endian. Version 1 holds a DeepAM model.
//! Version 2 holds its rectifier-network export: each layer's weight matrix
//! (with `d_ipad` doubled) and the negated biases in place of `λ`, followed by
//! the read-out matrix.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{AnalysisLayer, DeepAmModel, ReluLayer, ReluNetwork};
use crate::patches::PatchGeometry;

pub const MAGIC: &[u8; 4] = b"DAM1";
pub const MODEL_VERSION: u32 = 1;
pub const RELU_VERSION: u32 = 2;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(version: u32) -> Self {
        let mut w = Self { buf: Vec::new() };
        w.buf.extend_from_slice(MAGIC);
        w.u32(version);
        w
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn len(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::invalid(format!("{v} does not fit in u32")))?;
        self.u32(v);
        Ok(())
    }

    fn f64s<'a>(&mut self, vals: impl IntoIterator<Item = &'a f64>) {
        for v in vals {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn matrix(&mut self, m: &DMatrix<f64>) {
        for r in 0..m.nrows() {
            self.f64s(m.row(r).iter());
        }
    }

    fn header(&mut self, layers: usize, geom: &PatchGeometry, sigma: f64) -> Result<()> {
        self.len(layers)?;
        for v in [geom.lr_side, geom.scale, geom.crop_side, geom.stride] {
            self.len(v)?;
        }
        self.f64s([sigma].iter());
        Ok(())
    }

    fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.data.len());
        let Some(end) = end else {
            return Err(Error::format(
                self.data.len(),
                format!("file truncated while reading {what} (needed {n} bytes at offset {})", self.pos),
            ));
        };
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        Ok(self.u32(what)? as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::format(self.pos, format!("{what} length overflows")))?;
        let raw = self.take(bytes, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format(self.pos, format!("{what} size overflows")))?;
        Ok(DMatrix::from_row_slice(rows, cols, &self.f64s(n, what)?))
    }

    fn open(data: &'a [u8], expected_version: u32) -> Result<Self> {
        let mut r = Self { data, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::format(0, format!("bad magic {magic:?}, expected \"DAM1\"")));
        }
        let version = r.u32("format version")?;
        if version != expected_version {
            return Err(Error::format(
                4,
                format!("format version {version}, expected {expected_version}"),
            ));
        }
        Ok(r)
    }

    fn header(&mut self) -> Result<(usize, PatchGeometry, f64)> {
        let layers = self.usize("layer count")?;
        let at = self.pos;
        let g = [
            self.usize("patch geometry")?,
            self.usize("patch geometry")?,
            self.usize("patch geometry")?,
            self.usize("patch geometry")?,
        ];
        let geom = PatchGeometry {
            lr_side: g[0],
            scale: g[1],
            crop_side: g[2],
            stride: g[3],
        };
        geom.validate().map_err(|e| Error::format(at, e.to_string()))?;
        let sigma = self.f64("training noise sigma")?;
        Ok((layers, geom, sigma))
    }

    fn finish(mut self) -> Result<()> {
        let payload_end = self.pos;
        let stored = self.u32("checksum")?;
        let actual = crc32fast::hash(&self.data[..payload_end]);
        if stored != actual {
            return Err(Error::format(
                payload_end,
                format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}"),
            ));
        }
        if self.pos != self.data.len() {
            return Err(Error::format(
                self.pos,
                format!("{} trailing bytes after checksum", self.data.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub fn model_to_bytes(model: &DeepAmModel) -> Result<Vec<u8>> {
    model.validate()?;
    let mut w = Writer::new(MODEL_VERSION);
    w.header(model.depth(), &model.geometry, model.training_noise_sigma)?;
    for layer in &model.layers {
        w.len(layer.d_in())?;
        w.len(layer.d_out())?;
        w.len(layer.ipad_atoms)?;
        w.matrix(&layer.omega);
        w.f64s(layer.lambda.iter());
    }
    w.len(model.synthesis.nrows())?;
    w.len(model.synthesis.ncols())?;
    w.matrix(&model.synthesis);
    Ok(w.finish())
}

pub fn model_from_bytes(data: &[u8]) -> Result<DeepAmModel> {
    let mut r = Reader::open(data, MODEL_VERSION)?;
    let (depth, geometry, sigma) = r.header()?;
    let mut layers = Vec::with_capacity(depth.min(1024));
    let mut prev_out = None;
    for i in 0..depth {
        let at = r.pos;
        let d_in = r.usize("layer input dimension")?;
        let d_out = r.usize("layer output dimension")?;
        let d_ipad = r.usize("IPAD atom count")?;
        if let Some(p) = prev_out {
            if p != d_in {
                return Err(Error::format(
                    at,
                    format!("layer {} takes {d_in} inputs but the previous layer emits {p}", i + 1),
                ));
            }
        }
        let omega = r.matrix(d_out, d_in, "analysis dictionary")?;
        let lambda = r.f64s(d_out, "thresholds")?;
        let layer = AnalysisLayer::new(omega, lambda, d_ipad)
            .map_err(|e| Error::format(at, format!("layer {}: {e}", i + 1)))?;
        prev_out = Some(d_out);
        layers.push(layer);
    }
    let at = r.pos;
    let rows = r.usize("synthesis rows")?;
    let cols = r.usize("synthesis columns")?;
    if let Some(p) = prev_out {
        if p != cols {
            return Err(Error::format(
                at,
                format!("synthesis dictionary has {cols} columns, last layer emits {p}"),
            ));
        }
    }
    let synthesis = r.matrix(rows, cols, "synthesis dictionary")?;
    r.finish()?;
    DeepAmModel::new(layers, synthesis, geometry, sigma).map_err(|e| Error::format(at, e.to_string()))
}

/// Serializes the rectifier export. Geometry and noise level are carried
/// over from the source model.
pub fn relu_to_bytes(net: &ReluNetwork, model: &DeepAmModel) -> Result<Vec<u8>> {
    let mut w = Writer::new(RELU_VERSION);
    w.header(net.layers.len(), &model.geometry, model.training_noise_sigma)?;
    for (layer, src) in net.layers.iter().zip(&model.layers) {
        w.len(layer.weight.ncols())?;
        w.len(layer.weight.nrows())?;
        w.len(2 * src.ipad_atoms)?;
        w.matrix(&layer.weight);
        let thresholds: Vec<f64> = layer.bias.iter().map(|b| -b).collect();
        w.f64s(thresholds.iter());
    }
    w.len(net.output.nrows())?;
    w.len(net.output.ncols())?;
    w.matrix(&net.output);
    Ok(w.finish())
}

pub fn relu_from_bytes(data: &[u8]) -> Result<ReluNetwork> {
    let mut r = Reader::open(data, RELU_VERSION)?;
    let (depth, _, _) = r.header()?;
    let mut layers = Vec::with_capacity(depth.min(1024));
    let mut prev_out: Option<usize> = None;
    for i in 0..depth {
        let at = r.pos;
        let d_in = r.usize("layer input dimension")?;
        let d_out = r.usize("layer output dimension")?;
        let _ = r.usize("IPAD atom count")?;
        if prev_out.is_some_and(|p| p != d_in) {
            return Err(Error::format(at, format!("layer {} breaks the dimension chain", i + 1)));
        }
        let weight = r.matrix(d_out, d_in, "layer weights")?;
        let bias = DVector::from_iterator(d_out, r.f64s(d_out, "biases")?.into_iter().map(|t| -t));
        prev_out = Some(d_out);
        layers.push(ReluLayer { weight, bias });
    }
    let at = r.pos;
    let rows = r.usize("read-out rows")?;
    let cols = r.usize("read-out columns")?;
    if prev_out.is_some_and(|p| p != cols) {
        return Err(Error::format(at, "read-out matrix breaks the dimension chain"));
    }
    let output = r.matrix(rows, cols, "read-out matrix")?;
    r.finish()?;
    Ok(ReluNetwork { layers, output })
}

pub fn save_model(model: &DeepAmModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DeepAmModel> {
    model_from_bytes(&fs::read(path)?)
}

pub fn save_relu(net: &ReluNetwork, model: &DeepAmModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, relu_to_bytes(net, model)?)?;
    Ok(())
}

pub fn load_relu(path: impl AsRef<Path>) -> Result<ReluNetwork> {
    relu_from_bytes(&fs::read(path)?)
}
