use crate::error::{Error, Result};
use crate::grid::{LabelGrid, IGNORE};

/// Counts of (ground-truth class, pseudo-class) pairs. Row `c` is ground-truth
/// class `c`; column `j` is pseudo-class label `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    gt_classes: usize,
    pseudo_classes: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ConfusionMatrix {
    pub fn zeros(gt_classes: usize, pseudo_classes: usize) -> Self {
        Self {
            gt_classes,
            pseudo_classes,
            counts: vec![0; gt_classes * pseudo_classes],
            total: 0,
        }
    }

    /// Builds a matrix from row-major counts.
    pub fn from_counts(gt_classes: usize, pseudo_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != gt_classes * pseudo_classes {
            return Err(Error::ShapeMismatch(format!(
                "{} counts for a {gt_classes}x{pseudo_classes} matrix",
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(Self {
            gt_classes,
            pseudo_classes,
            counts,
            total,
        })
    }

    pub fn gt_classes(&self) -> usize {
        self.gt_classes
    }

    pub fn pseudo_classes(&self) -> usize {
        self.pseudo_classes
    }

    pub fn total_labeled(&self) -> u64 {
        self.total
    }

    pub fn get(&self, c: usize, j: usize) -> u64 {
        self.counts[c * self.pseudo_classes + j]
    }

    pub fn row(&self, c: usize) -> &[u64] {
        &self.counts[c * self.pseudo_classes..(c + 1) * self.pseudo_classes]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Adds another matrix of the same shape.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if (self.gt_classes, self.pseudo_classes) != (other.gt_classes, other.pseudo_classes) {
            return Err(Error::ShapeMismatch(format!(
                "cannot merge {}x{} into {}x{}",
                other.gt_classes, other.pseudo_classes, self.gt_classes, self.pseudo_classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }
}

/// Pixel-wise confusion of `gt` (classes `0..gt_classes`, IGNORE skipped)
/// against `pred` (labels `1..=pseudo_classes`).
pub fn confusion_matrix(
    gt: &LabelGrid,
    pred: &LabelGrid,
    gt_classes: usize,
    pseudo_classes: usize,
) -> Result<ConfusionMatrix> {
    if !gt.same_shape(pred) {
        return Err(Error::ShapeMismatch(format!(
            "ground truth is {}x{}, prediction is {}x{}",
            gt.rows(),
            gt.cols(),
            pred.rows(),
            pred.cols()
        )));
    }
    let mut m = ConfusionMatrix::zeros(gt_classes, pseudo_classes);
    for (&g, &p) in gt.as_slice().iter().zip(pred.as_slice()) {
        if g == IGNORE {
            continue;
        }
        if g as usize >= gt_classes {
            return Err(Error::LabelOutOfRange {
                label: g as u32,
                expected: format!("0..{gt_classes} or IGNORE"),
            });
        }
        if p == 0 || p as usize > pseudo_classes {
            return Err(Error::LabelOutOfRange {
                label: p as u32,
                expected: format!("1..={pseudo_classes}"),
            });
        }
        m.counts[g as usize * pseudo_classes + p as usize - 1] += 1;
        m.total += 1;
    }
    Ok(m)
}
