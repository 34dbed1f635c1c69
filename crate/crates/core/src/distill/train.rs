//! Mini-batch training of the per-pixel classifier.
//!
//! A step draws `batch` frames, samples up to `pixels_per_image` supervised
//! pixels from each, and averages the per-frame losses uniformly. Per-frame
//! normalisation follows the target: pseudo-labelled pixels for partial
//! targets, all sampled pixels for complete ones. The learning rate decays
//! polynomially, `lr * (1 - t / T)^power`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::log_softmax_in_place;
use super::{ClassifierParams, PixelFeatureMap, RefinedMap};
use crate::error::{Error, Result};
use crate::grid::IGNORE;
use crate::pseudolabel::PseudoLabelMap;

/// Pixels per parallel work unit. Fixed so that reductions do not depend on
/// the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// Pseudo-labels with IGNORE holes (teacher).
    Partial(&'a PseudoLabelMap),
    /// Complete refined maps (student).
    Complete(&'a RefinedMap),
}

impl Target<'_> {
    fn labels(&self) -> &[u16] {
        match self {
            Target::Partial(m) | Target::Complete(m) => m.as_slice(),
        }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            Target::Partial(m) | Target::Complete(m) => m.shape(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyper {
    pub lr: f64,
    /// Frames per step.
    pub batch: usize,
    pub epochs: usize,
    /// Not read from configuration files; the pipeline derives it from the root seed.
    #[serde(skip)]
    pub seed: u64,
    pub hidden: usize,
    /// Pixels sampled per frame and step; 0 uses every supervised pixel.
    pub pixels_per_image: usize,
    pub optimizer: Optimizer,
    /// Exponent of the polynomial learning-rate decay.
    pub power: f64,
    /// Side of a random square window that restricts pixel sampling; `None` disables it.
    pub random_crop: Option<usize>,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            batch: 32,
            epochs: 20,
            seed: 0,
            hidden: 32,
            pixels_per_image: 1024,
            optimizer: Optimizer::Adam,
            power: 0.9,
            random_crop: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    /// Batch loss before the step's update.
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub params: ClassifierParams,
    pub log: Vec<LogEntry>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ClassifierParams, grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((w, g), m), v) in params.params_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *w -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

pub fn train(
    frames: &[PixelFeatureMap],
    targets: &[Target<'_>],
    classes: usize,
    hyper: &TrainHyper,
) -> Result<TrainResult> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("training needs at least one frame".into()));
    }
    if frames.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} frames but {} targets",
            frames.len(),
            targets.len()
        )));
    }
    if hyper.batch == 0 || hyper.hidden == 0 || classes == 0 {
        return Err(Error::InvalidArgument(
            "batch, hidden width and class count must be positive".into(),
        ));
    }
    let inputs = frames[0].dim();
    for (f, t) in frames.iter().zip(targets) {
        if f.dim() != inputs {
            return Err(Error::DimensionMismatch {
                expected: inputs,
                found: f.dim(),
            });
        }
        if (f.rows(), f.cols()) != t.shape() {
            return Err(Error::ShapeMismatch(format!(
                "frame is {}x{}, target is {}x{}",
                f.rows(),
                f.cols(),
                t.shape().0,
                t.shape().1
            )));
        }
        for &l in t.labels() {
            let ok = (l >= 1 && l as usize <= classes) || (l == IGNORE && matches!(t, Target::Partial(_)));
            if !ok {
                return Err(Error::LabelOutOfRange {
                    label: l as u32,
                    expected: format!("1..={classes}"),
                });
            }
        }
    }

    let mut params = ClassifierParams::init(inputs, hyper.hidden, classes, hyper.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x7261_696e);
    let mut adam = Adam::new(params.len());
    let steps_per_epoch = frames.len().div_ceil(hyper.batch);
    let total = hyper.epochs * steps_per_epoch;
    let mut log = Vec::with_capacity(total);
    let mut order: Vec<usize> = (0..frames.len()).collect();
    let mut step = 0;

    for _ in 0..hyper.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for batch in order.chunks(hyper.batch) {
            let lr = hyper.lr * (1.0 - step as f64 / total as f64).powf(hyper.power);
            let mut grad = vec![0.0; params.len()];
            let mut loss = 0.0;
            for &f in batch {
                let pixels = sample_pixels(&frames[f], &targets[f], hyper, &mut rng);
                let (l, g) = frame_loss_grad(&params, &frames[f], targets[f].labels(), &pixels);
                loss += l / batch.len() as f64;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b / batch.len() as f64;
                }
            }
            log.push(LogEntry { step, loss, lr });
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    step,
                    trajectory: log.iter().map(|e| e.loss).collect(),
                });
            }
            match hyper.optimizer {
                Optimizer::Sgd => {
                    for (w, g) in params.params_mut().zip(&grad) {
                        *w -= lr * g;
                    }
                }
                Optimizer::Adam => adam.step(&mut params, &grad, lr),
            }
            step += 1;
        }
    }
    Ok(TrainResult { params, log })
}

/// Supervised pixels (row-major indices, ascending) drawn for one step.
fn sample_pixels(
    frame: &PixelFeatureMap,
    target: &Target<'_>,
    hyper: &TrainHyper,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let (rows, cols) = (frame.rows(), frame.cols());
    let (r0, r1, c0, c1) = match hyper.random_crop {
        Some(side) if side < rows || side < cols => {
            let (sh, sw) = (side.min(rows), side.min(cols));
            let r0 = rng.random_range(0..=rows - sh);
            let c0 = rng.random_range(0..=cols - sw);
            (r0, r0 + sh, c0, c0 + sw)
        }
        _ => (0, rows, 0, cols),
    };
    let labels = target.labels();
    let candidates: Vec<usize> = (r0..r1)
        .flat_map(|r| (c0..c1).map(move |c| r * cols + c))
        .filter(|&i| labels[i] != IGNORE)
        .collect();
    let n = hyper.pixels_per_image;
    if n == 0 || n >= candidates.len() {
        return candidates;
    }
    let mut picked: Vec<usize> = index::sample(rng, candidates.len(), n)
        .into_iter()
        .map(|j| candidates[j])
        .collect();
    picked.sort_unstable();
    picked
}

/// Mean cross-entropy over `pixels` and its gradient in parameter order.
fn frame_loss_grad(
    params: &ClassifierParams,
    frame: &PixelFeatureMap,
    labels: &[u16],
    pixels: &[usize],
) -> (f64, Vec<f64>) {
    let n_params = params.len();
    if pixels.is_empty() {
        return (0.0, vec![0.0; n_params]);
    }
    let weight = 1.0 / pixels.len() as f64;
    let (hidden, k, inputs) = (params.hidden, params.classes, params.inputs);
    let (o_b1, o_w2) = (hidden * inputs, hidden * inputs + hidden);
    let o_b2 = o_w2 + k * hidden;

    let partials: Vec<(f64, Vec<f64>)> = pixels
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; n_params];
            let mut loss = 0.0;
            let mut h = vec![0.0; hidden];
            let mut z = vec![0.0; k];
            let mut dh = vec![0.0; hidden];
            for &i in chunk {
                let x = frame.pixel(i);
                params.forward_pixel(x, &mut h, &mut z);
                log_softmax_in_place(&mut z);
                let logp = &z;
                let t = labels[i] as usize - 1;
                loss -= logp[t];
                dh.iter_mut().for_each(|d| *d = 0.0);
                for c in 0..k {
                    let gz = weight * (logp[c].exp() - if c == t { 1.0 } else { 0.0 });
                    grad[o_b2 + c] += gz;
                    let w2_row = &params.w2[c * hidden..(c + 1) * hidden];
                    let g_row = &mut grad[o_w2 + c * hidden..o_w2 + (c + 1) * hidden];
                    for j in 0..hidden {
                        g_row[j] += gz * h[j];
                        dh[j] += gz * w2_row[j];
                    }
                }
                for j in 0..hidden {
                    let dpre = dh[j] * (1.0 - h[j] * h[j]);
                    grad[o_b1 + j] += dpre;
                    let g_row = &mut grad[j * inputs..(j + 1) * inputs];
                    for (g, xv) in g_row.iter_mut().zip(x) {
                        *g += dpre * xv;
                    }
                }
            }
            (loss, grad)
        })
        .collect();

    let mut grad = vec![0.0; n_params];
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    (loss * weight, grad)
}

/// Writes the `step,loss,lr` training log.
pub fn write_training_log(path: &Path, log: &[LogEntry]) -> Result<()> {
    let mut s = String::from("step,loss,lr\n");
    for e in log {
        let _ = writeln!(s, "{},{},{}", e.step, e.loss, e.lr);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
