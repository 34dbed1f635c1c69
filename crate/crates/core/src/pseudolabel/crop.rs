use super::SegmentSource;
use crate::error::{Error, Result};
use crate::grid::{Grid, RgbImage};
use crate::projection::ImageSegmentMap;

/// Tight bounding-box crop around one segment. Pixels outside the segment
/// are zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentCrop {
    pub source: SegmentSource,
    /// Top-left corner of the box in the source image (column, row).
    pub origin: (usize, usize),
    pub pixels: RgbImage,
    pub mask: Grid<bool>,
    /// Extent of the source image (width, height).
    pub image_size: (usize, usize),
}

impl SegmentCrop {
    pub fn width(&self) -> usize {
        self.mask.cols()
    }

    pub fn height(&self) -> usize {
        self.mask.rows()
    }

    pub fn mask_count(&self) -> usize {
        self.mask.as_slice().iter().filter(|&&m| m).count()
    }
}

pub fn crop_segment(
    image: &RgbImage,
    segmap: &ImageSegmentMap,
    segment_id: u16,
    frame_id: &str,
) -> Result<SegmentCrop> {
    if !image.same_shape(segmap) {
        return Err(Error::ShapeMismatch(format!(
            "image is {}x{}, segment map is {}x{}",
            image.rows(),
            image.cols(),
            segmap.rows(),
            segmap.cols()
        )));
    }
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for r in 0..segmap.rows() {
        for c in 0..segmap.cols() {
            if *segmap.get(r, c) == segment_id {
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    if r0 == usize::MAX {
        return Err(Error::UnknownSegment(segment_id));
    }
    let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
    let mask = Grid::from_fn(h, w, |r, c| *segmap.get(r0 + r, c0 + c) == segment_id);
    let pixels = Grid::from_fn(h, w, |r, c| {
        if *mask.get(r, c) {
            *image.get(r0 + r, c0 + c)
        } else {
            [0; 3]
        }
    });
    Ok(SegmentCrop {
        source: SegmentSource {
            frame_id: frame_id.to_owned(),
            segment_id,
        },
        origin: (c0, r0),
        pixels,
        mask,
        image_size: (image.cols(), image.rows()),
    })
}
