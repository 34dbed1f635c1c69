//! Segment-wise pseudo-labelling: crop each image segment, describe it,
//! cluster the descriptors with k-means and paint cluster ids back onto the
//! segment pixels.

mod crop;
mod features;
mod io;
mod kmeans;

pub use crop::{crop_segment, SegmentCrop};
pub use features::{extract_features, FeatureParams, FEATURE_DIM};
pub use io::{load_external_features, read_cluster_model, save_features, write_cluster_model};
pub use kmeans::{kmeans_assign, kmeans_fit, ClusterModel, KMeansFit, KMeansParams};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{LabelGrid, GROUND, IGNORE, MAX_SEGMENT_ID};
use crate::projection::ImageSegmentMap;

/// Per-pixel cluster ids `1..=k`, IGNORE elsewhere.
pub type PseudoLabelMap = LabelGrid;

/// Identifies a segment across the dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentSource {
    pub frame_id: String,
    pub segment_id: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeature {
    pub source: SegmentSource,
    pub vector: Vec<f64>,
}

/// Pixel count of every segment id (including `GROUND`) present in `segmap`.
pub fn segment_pixel_counts(segmap: &ImageSegmentMap) -> BTreeMap<u16, usize> {
    let mut counts = BTreeMap::new();
    for &l in segmap.as_slice() {
        if l != IGNORE {
            *counts.entry(l).or_insert(0) += 1;
        }
    }
    counts
}

/// Relabels segments with fewer than `min_pixels` pixels as IGNORE.
pub fn drop_small_segments(segmap: &ImageSegmentMap, min_pixels: usize) -> ImageSegmentMap {
    let counts = segment_pixel_counts(segmap);
    segmap.map(|&l| {
        if l != IGNORE && counts[&l] < min_pixels {
            IGNORE
        } else {
            l
        }
    })
}

/// Paints cluster ids onto segment pixels.
///
/// Every object segment in `segmap` needs an entry in `assignment`; so does
/// `GROUND` when `include_ground` is set, otherwise ground pixels become IGNORE.
pub fn assemble_pseudo_labels(
    segmap: &ImageSegmentMap,
    assignment: &BTreeMap<u16, u16>,
    include_ground: bool,
) -> Result<PseudoLabelMap> {
    if let Some((_, &bad)) = assignment
        .iter()
        .find(|(_, &c)| c == 0 || c > MAX_SEGMENT_ID)
    {
        return Err(Error::LabelOutOfRange {
            label: bad as u32,
            expected: format!("cluster id in 1..={MAX_SEGMENT_ID}"),
        });
    }
    let mut out = segmap.clone();
    for l in out.as_mut_slice() {
        *l = match *l {
            IGNORE => IGNORE,
            GROUND if !include_ground => IGNORE,
            seg => *assignment.get(&seg).ok_or(Error::MissingAssignment(seg))?,
        };
    }
    Ok(out)
}
