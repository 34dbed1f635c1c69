use super::{ClassMapping, ConfusionMatrix};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// IoU per ground-truth class; `None` for classes with no pixels in
    /// either ground truth or their matched prediction.
    pub per_class_iou: Vec<Option<f64>>,
    /// Mean over classes with a defined IoU; `None` when there are none.
    pub miou: Option<f64>,
    pub pixel_accuracy: f64,
    pub mapping: ClassMapping,
    /// Labelled pixels predicted as a pseudo-class no ground-truth class maps to.
    pub unmapped_pixel_count: u64,
    pub total_labeled: u64,
}

pub fn evaluate(conf: &ConfusionMatrix, mapping: &ClassMapping) -> Result<EvalReport> {
    mapping.validate(conf)?;
    let k = conf.pseudo_classes();
    let inverse = mapping.inverse(k);
    let col_sum: Vec<u64> = (0..k)
        .map(|j| (0..conf.gt_classes()).map(|c| conf.get(c, j)).sum())
        .collect();

    let mut tp_total = 0;
    let per_class_iou: Vec<Option<f64>> = mapping
        .assignment
        .iter()
        .enumerate()
        .map(|(c, &j)| {
            let tp = conf.get(c, j);
            let fp = col_sum[j] - tp;
            let fn_ = conf.row(c).iter().sum::<u64>() - tp;
            tp_total += tp;
            let denom = tp + fp + fn_;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect();
    let defined: Vec<f64> = per_class_iou.iter().flatten().copied().collect();
    let miou = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let unmapped_pixel_count = (0..k).filter(|&j| inverse[j].is_none()).map(|j| col_sum[j]).sum();
    let total = conf.total_labeled();
    let pixel_accuracy = if total == 0 {
        0.0
    } else {
        tp_total as f64 / total as f64
    };
    Ok(EvalReport {
        per_class_iou,
        miou,
        pixel_accuracy,
        mapping: mapping.clone(),
        unmapped_pixel_count,
        total_labeled: total,
    })
}

/// Row-normalised confusion with columns in matched order.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedConfusion {
    /// `values[c][i]` is the fraction of class `c` pixels in pseudo-class column `column_order[i]`.
    pub values: Vec<Vec<f64>>,
    /// Pseudo-class columns (0-based) in display order: the match of each
    /// ground-truth class, then unmatched columns ascending.
    pub column_order: Vec<usize>,
}

pub fn normalized_confusion_report(
    conf: &ConfusionMatrix,
    mapping: &ClassMapping,
) -> Result<NormalizedConfusion> {
    mapping.validate(conf)?;
    let inverse = mapping.inverse(conf.pseudo_classes());
    let mut column_order = mapping.assignment.clone();
    column_order.extend((0..conf.pseudo_classes()).filter(|&j| inverse[j].is_none()));
    let values = (0..conf.gt_classes())
        .map(|c| {
            let sum: u64 = conf.row(c).iter().sum();
            column_order
                .iter()
                .map(|&j| if sum == 0 { 0.0 } else { conf.get(c, j) as f64 / sum as f64 })
                .collect()
        })
        .collect();
    Ok(NormalizedConfusion { values, column_order })
}
