//! Handcrafted segment descriptor.
//!
//! Layout (92 values before weighting):
//! - `0..24`: 8-bin histogram per RGB channel over mask pixels, as fractions;
//! - `24..88`: 8x8 binary occupancy of the mask resized to 64x64 (nearest);
//! - `88..92`: ln(box aspect), mask fill ratio, sqrt(mask area) / image
//!   diagonal, box centre height / image height.
//!
//! Each block is scaled by its weight, then the whole vector is L2-normalised.

use serde::{Deserialize, Serialize};

use super::{SegmentCrop, SegmentFeature};
use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = 92;

const BINS: usize = 8;
const CANONICAL: usize = 64;
const OCC: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureParams {
    pub color_weight: f64,
    pub occupancy_weight: f64,
    pub shape_weight: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        // Colour dominates; geometry only breaks ties. Heavier occupancy or
        // shape terms split one class across clusters by pose and size.
        Self {
            color_weight: 1.0,
            occupancy_weight: 0.05,
            shape_weight: 0.2,
        }
    }
}

pub fn extract_features(crop: &SegmentCrop, params: &FeatureParams) -> Result<SegmentFeature> {
    let count = crop.mask_count();
    if count == 0 {
        return Err(Error::InvalidArgument(format!(
            "segment {} has an empty mask",
            crop.source.segment_id
        )));
    }
    let mut v = vec![0.0; FEATURE_DIM];

    for (px, &m) in crop.pixels.as_slice().iter().zip(crop.mask.as_slice()) {
        if m {
            for (ch, &value) in px.iter().enumerate() {
                v[ch * BINS + value as usize * BINS / 256] += 1.0;
            }
        }
    }
    for x in &mut v[..3 * BINS] {
        *x *= params.color_weight / count as f64;
    }

    let (w, h) = (crop.width(), crop.height());
    let cell = CANONICAL / OCC;
    for br in 0..OCC {
        for bc in 0..OCC {
            let mut on = 0;
            for r in br * cell..(br + 1) * cell {
                for c in bc * cell..(bc + 1) * cell {
                    let sr = r * h / CANONICAL;
                    let sc = c * w / CANONICAL;
                    on += usize::from(*crop.mask.get(sr, sc));
                }
            }
            if 2 * on >= cell * cell {
                v[3 * BINS + br * OCC + bc] = params.occupancy_weight;
            }
        }
    }

    let (iw, ih) = crop.image_size;
    let diag = (iw as f64).hypot(ih as f64);
    let shape = [
        (w as f64 / h as f64).ln(),
        count as f64 / (w * h) as f64,
        (count as f64).sqrt() / diag,
        (crop.origin.1 as f64 + h as f64 / 2.0) / ih as f64,
    ];
    for (slot, s) in v[3 * BINS + OCC * OCC..].iter_mut().zip(shape) {
        *slot = params.shape_weight * s;
    }

    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument(
            "descriptor has zero or non-finite norm; check feature weights".into(),
        ));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(SegmentFeature {
        source: crop.source.clone(),
        vector: v,
    })
}
