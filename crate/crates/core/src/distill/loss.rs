use super::{PixelPredictionMap, RefinedMap};
use crate::error::{Error, Result};
use crate::grid::{Grid, IGNORE};
use crate::pseudolabel::PseudoLabelMap;

/// Loss value and its gradient with respect to the logits (`rows * cols * k`).
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// `true` where the pseudo-label map carries a label.
pub fn valid_mask(m: &PseudoLabelMap) -> Grid<bool> {
    m.map(|&l| l != IGNORE)
}

fn check_shape(pred: &PixelPredictionMap, rows: usize, cols: usize) -> Result<()> {
    if (pred.rows(), pred.cols()) != (rows, cols) {
        return Err(Error::ShapeMismatch(format!(
            "prediction is {}x{}, target is {rows}x{cols}",
            pred.rows(),
            pred.cols()
        )));
    }
    Ok(())
}

fn check_label(label: u16, k: usize) -> Result<usize> {
    if label == 0 || label as usize > k {
        return Err(Error::LabelOutOfRange {
            label: label as u32,
            expected: format!("1..={k}"),
        });
    }
    Ok(label as usize - 1)
}

/// Cross-entropy of `probs` against `target`, with `probs - onehot` scaled by
/// `weight` accumulated into `grad`.
fn ce_into(probs: &[f64], target: usize, weight: f64, grad: &mut [f64]) -> f64 {
    for (g, &p) in grad.iter_mut().zip(probs) {
        *g = weight * p;
    }
    grad[target] -= weight;
    -probs[target].max(f64::MIN_POSITIVE).ln()
}

/// Cross-entropy averaged over pseudo-labelled pixels only.
///
/// Returns zero loss and gradient when no pixel is labelled.
pub fn teacher_loss(pred: &PixelPredictionMap, m: &PseudoLabelMap) -> Result<LossOutput> {
    check_shape(pred, m.rows(), m.cols())?;
    let k = pred.classes();
    let labelled = m.as_slice().iter().filter(|&&l| l != IGNORE).count();
    let mut grad = vec![0.0; pred.probs().len()];
    if labelled == 0 {
        return Ok(LossOutput { loss: 0.0, grad });
    }
    let weight = 1.0 / labelled as f64;
    let mut total = 0.0;
    for (i, &l) in m.as_slice().iter().enumerate() {
        if l == IGNORE {
            continue;
        }
        let t = check_label(l, k)?;
        total += ce_into(pred.pixel(i), t, weight, &mut grad[i * k..(i + 1) * k]);
    }
    Ok(LossOutput {
        loss: total * weight,
        grad,
    })
}

/// Cross-entropy averaged over every pixel of a complete target map.
pub fn student_loss(refined: &RefinedMap, pred: &PixelPredictionMap) -> Result<LossOutput> {
    check_shape(pred, refined.rows(), refined.cols())?;
    let k = pred.classes();
    let n = refined.len();
    let mut grad = vec![0.0; pred.probs().len()];
    if n == 0 {
        return Ok(LossOutput { loss: 0.0, grad });
    }
    let weight = 1.0 / n as f64;
    let mut total = 0.0;
    for (i, &l) in refined.as_slice().iter().enumerate() {
        let t = check_label(l, k)?;
        total += ce_into(pred.pixel(i), t, weight, &mut grad[i * k..(i + 1) * k]);
    }
    Ok(LossOutput {
        loss: total * weight,
        grad,
    })
}
