use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{LabelGrid, GROUND, IGNORE};
use crate::projection::ImageSegmentMap;

/// Complete label map `1..=k`, constant inside every voting region.
pub type RefinedMap = LabelGrid;

/// Majority vote of `pred_labels` inside every segment of `segmap`.
///
/// Object segments, and the ground region when `include_ground` is set, each
/// receive their most frequent predicted label (ties: smallest label).
/// Pixels outside those regions keep their prediction.
pub fn refine_predictions(
    pred_labels: &LabelGrid,
    segmap: &ImageSegmentMap,
    include_ground: bool,
) -> Result<RefinedMap> {
    if !pred_labels.same_shape(segmap) {
        return Err(Error::ShapeMismatch(format!(
            "predictions are {}x{}, segments are {}x{}",
            pred_labels.rows(),
            pred_labels.cols(),
            segmap.rows(),
            segmap.cols()
        )));
    }
    if let Some(&bad) = pred_labels
        .as_slice()
        .iter()
        .find(|&&l| l == 0 || l == IGNORE || l == GROUND)
    {
        return Err(Error::LabelOutOfRange {
            label: bad as u32,
            expected: "a predicted class id".into(),
        });
    }
    let votes_here = |s: u16| s != IGNORE && (include_ground || s != GROUND);

    let mut votes: BTreeMap<u16, BTreeMap<u16, usize>> = BTreeMap::new();
    for (&s, &p) in segmap.as_slice().iter().zip(pred_labels.as_slice()) {
        if votes_here(s) {
            *votes.entry(s).or_default().entry(p).or_insert(0) += 1;
        }
    }
    let winner: BTreeMap<u16, u16> = votes
        .into_iter()
        .map(|(s, counts)| {
            // BTreeMap iterates labels ascending, so the first maximum is the smallest label.
            let mut best = (0u16, 0usize);
            for (label, n) in counts {
                if n > best.1 {
                    best = (label, n);
                }
            }
            (s, best.0)
        })
        .collect();

    let mut out = pred_labels.clone();
    for (o, &s) in out.as_mut_slice().iter_mut().zip(segmap.as_slice()) {
        if votes_here(s) {
            *o = winner[&s];
        }
    }
    Ok(out)
}
