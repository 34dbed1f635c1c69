//! One-hidden-layer per-pixel network: affine, tanh, affine, softmax.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::PixelFeatureMap;
use crate::error::{Error, Result};
use crate::grid::{Grid, LabelGrid};

const MAGIC: &[u8; 8] = b"DSEGCLS1";

/// Weights stored row-major: `w1` is `hidden x inputs`, `w2` is `classes x hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ClassifierParams {
    pub fn zeros(inputs: usize, hidden: usize, classes: usize) -> Self {
        Self {
            inputs,
            hidden,
            classes,
            w1: vec![0.0; hidden * inputs],
            b1: vec![0.0; hidden],
            w2: vec![0.0; classes * hidden],
            b2: vec![0.0; classes],
        }
    }

    /// Uniform(-0.1, 0.1) initialisation.
    pub fn init(inputs: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(inputs, hidden, classes);
        for x in p.params_mut() {
            *x = rng.random_range(-0.1..0.1);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters in file order: w1, b1, w2, b2.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
    }

    fn check(&self) -> Result<()> {
        let ok = self.w1.len() == self.hidden * self.inputs
            && self.b1.len() == self.hidden
            && self.w2.len() == self.classes * self.hidden
            && self.b2.len() == self.classes
            && self.classes >= 1;
        if !ok {
            return Err(Error::ShapeMismatch(format!(
                "parameter vectors inconsistent with ({}, {}, {})",
                self.inputs, self.hidden, self.classes
            )));
        }
        Ok(())
    }

    /// Hidden activations and logits for one input vector.
    pub(crate) fn forward_pixel(&self, x: &[f64], hidden: &mut [f64], logits: &mut [f64]) {
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
            // tanh via one exp; libm tanh dominates the runtime otherwise.
            *h = 1.0 - 2.0 / ((2.0 * z).exp() + 1.0);
        }
        for (c, out) in logits.iter_mut().enumerate() {
            let row = &self.w2[c * self.hidden..(c + 1) * self.hidden];
            *out = row.iter().zip(hidden.iter()).map(|(w, v)| w * v).sum::<f64>() + self.b2[c];
        }
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    log_softmax_in_place(&mut out);
    out
}

pub(crate) fn log_softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter_mut().for_each(|v| *v -= lse);
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

fn softmax_in_place(z: &mut [f64]) {
    log_softmax_in_place(z);
    z.iter_mut().for_each(|v| *v = v.exp());
}

/// Class probabilities per pixel and their argmax (`1..=k`, ties to the smaller id).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelPredictionMap {
    rows: usize,
    cols: usize,
    classes: usize,
    probs: Vec<f64>,
    argmax: LabelGrid,
}

impl PixelPredictionMap {
    /// Builds a map from per-pixel logits (`rows * cols * classes`, row-major).
    pub fn from_logits(rows: usize, cols: usize, classes: usize, logits: &[f64]) -> Result<Self> {
        if classes == 0 || logits.len() != rows * cols * classes {
            return Err(Error::ShapeMismatch(format!(
                "{} logits for a {rows}x{cols}x{classes} map",
                logits.len()
            )));
        }
        let mut probs = logits.to_vec();
        probs.chunks_exact_mut(classes).for_each(softmax_in_place);
        let argmax = Grid::from_vec(
            rows,
            cols,
            probs.chunks_exact(classes).map(argmax_label).collect(),
        )
        .expect("length checked");
        Ok(Self {
            rows,
            cols,
            classes,
            probs,
            argmax,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Distribution of pixel `i` (row-major).
    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.probs[i * self.classes..(i + 1) * self.classes]
    }

    pub fn argmax(&self) -> &LabelGrid {
        &self.argmax
    }
}

fn argmax_label(p: &[f64]) -> u16 {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    (best + 1) as u16
}

pub fn classifier_forward(params: &ClassifierParams, feats: &PixelFeatureMap) -> Result<PixelPredictionMap> {
    params.check()?;
    if feats.dim() != params.inputs {
        return Err(Error::DimensionMismatch {
            expected: params.inputs,
            found: feats.dim(),
        });
    }
    let k = params.classes;
    let mut logits = vec![0.0; feats.pixels() * k];
    const BLOCK: usize = 512;
    logits.par_chunks_mut(k * BLOCK).enumerate().for_each(|(b, block)| {
        let mut hidden = vec![0.0; params.hidden];
        for (j, out) in block.chunks_exact_mut(k).enumerate() {
            params.forward_pixel(feats.pixel(b * BLOCK + j), &mut hidden, out);
        }
    });
    PixelPredictionMap::from_logits(feats.rows(), feats.cols(), k, &logits)
}

pub fn write_classifier(path: &Path, params: &ClassifierParams) -> Result<()> {
    params.check()?;
    let dim = |n: usize| {
        u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("dimension {n} exceeds u32")))
    };
    let mut out = Vec::with_capacity(8 + 12 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    for n in [params.inputs, params.hidden, params.classes] {
        out.extend_from_slice(&dim(n)?.to_le_bytes());
    }
    for w in params.params() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_classifier(path: &Path) -> Result<ClassifierParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ctx = || path.display().to_string();
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(Error::format(ctx(), "missing DSEGCLS1 header"));
    }
    let u = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let mut p = ClassifierParams::zeros(u(8), u(12), u(16));
    let body = &bytes[20..];
    if body.len() != 8 * p.len() {
        return Err(Error::format(
            ctx(),
            format!("expected {} weight bytes, found {}", 8 * p.len(), body.len()),
        ));
    }
    for (w, chunk) in p.params_mut().zip(body.chunks_exact(8)) {
        *w = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(rows: usize, cols: usize, dim: usize, seed: u64) -> PixelFeatureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        PixelFeatureMap::new(rows, cols, dim, data).unwrap()
    }

    #[test]
    fn zero_weights_give_uniform() {
        let p = ClassifierParams::zeros(3, 4, 5);
        let pred = classifier_forward(&p, &feats(2, 3, 3, 0)).unwrap();
        assert!(pred.probs().iter().all(|&q| (q - 0.2).abs() < 1e-15));
        assert!(pred.argmax().as_slice().iter().all(|&l| l == 1));
    }

    #[test]
    fn equal_logits_split_evenly() {
        let pred = PixelPredictionMap::from_logits(1, 1, 2, &[0.0, 0.0]).unwrap();
        assert_eq!(pred.pixel(0), &[0.5, 0.5]);
    }

    #[test]
    fn forward_matches_dense_matmul() {
        let p = ClassifierParams::init(3, 4, 2, 9);
        let f = feats(2, 2, 3, 1);
        let pred = classifier_forward(&p, &f).unwrap();
        for i in 0..4 {
            let x = f.pixel(i);
            let h: Vec<f64> = (0..4)
                .map(|j| ((0..3).map(|d| p.w1[j * 3 + d] * x[d]).sum::<f64>() + p.b1[j]).tanh())
                .collect();
            let z: Vec<f64> = (0..2)
                .map(|c| (0..4).map(|j| p.w2[c * 4 + j] * h[j]).sum::<f64>() + p.b2[c])
                .collect();
            let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
            let s: f64 = e.iter().sum();
            for c in 0..2 {
                assert!((pred.pixel(i)[c] - e[c] / s).abs() < 1e-14);
            }
            let sum: f64 = pred.pixel(i).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let p = ClassifierParams::zeros(3, 4, 2);
        assert!(classifier_forward(&p, &feats(1, 1, 5, 0)).is_err());
    }

    #[test]
    fn binary_roundtrip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cls.bin");
        let p = ClassifierParams::init(9, 32, 12, 3);
        write_classifier(&path, &p).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"DSEGCLS1");
        assert_eq!(&bytes[8..20], &[9, 0, 0, 0, 32, 0, 0, 0, 12, 0, 0, 0]);
        assert_eq!(bytes.len(), 20 + 8 * (32 * 9 + 32 + 12 * 32 + 12));
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), p.w1[0]);
        assert_eq!(read_classifier(&path).unwrap(), p);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ClassifierParams::init(4, 5, 3, 11);
        assert_eq!(a, ClassifierParams::init(4, 5, 3, 11));
        assert_ne!(a, ClassifierParams::init(4, 5, 3, 12));
        assert!(a.params().all(|w| w.abs() < 0.1));
    }
}
