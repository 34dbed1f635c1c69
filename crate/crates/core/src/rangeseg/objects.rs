use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{neighbors, LidarSpec, RangeImage};
use crate::error::{Error, Result};
use crate::grid::{Grid, LabelGrid, GROUND, IGNORE, MAX_SEGMENT_ID};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegParams {
    /// Neighbours are linked when their angle criterion exceeds this (radians).
    pub theta: f64,
    /// Components with fewer cells are relabelled IGNORE.
    pub min_segment_size: usize,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            theta: 10f64.to_radians(),
            min_segment_size: 20,
        }
    }
}

/// Cell labels of one scan: `GROUND`, `IGNORE` or an object segment `1..=J`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSegmentation {
    pub labels: LabelGrid,
    pub segment_count: usize,
}

impl RangeSegmentation {
    /// Wraps a label grid, recomputing the segment count.
    pub fn from_labels(labels: LabelGrid) -> Self {
        let segment_count = labels
            .as_slice()
            .iter()
            .filter(|&&l| l != IGNORE && l != GROUND)
            .map(|&l| l as usize)
            .max()
            .unwrap_or(0);
        Self {
            labels,
            segment_count,
        }
    }

    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.segment_count];
        for &l in self.labels.as_slice() {
            if l != IGNORE && l != GROUND {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

/// Angle criterion between two neighbouring returns at ranges `d1`, `d2`
/// separated by the angular step `alpha`.
///
/// The larger range is taken as the reference ray, so argument order does not
/// matter. Values near `pi/2` mean both returns lie on a surface facing the
/// sensor; small values mean a depth discontinuity.
pub fn neighbor_angle(d1: f64, d2: f64, alpha: f64) -> Result<f64> {
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ranges must be positive, got {d1} and {d2}"
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "angular step must be positive, got {alpha}"
        )));
    }
    let (far, near) = if d1 >= d2 { (d1, d2) } else { (d2, d1) };
    Ok((near * alpha.sin()).atan2(far - near * alpha.cos()))
}

/// Groups non-ground valid cells into object segments.
///
/// Segment ids follow the row-major order in which each component's first
/// cell is met, after components smaller than `min_segment_size` have been
/// dropped.
pub fn segment_objects(
    ri: &RangeImage,
    spec: &LidarSpec,
    ground: &Grid<bool>,
    params: &SegParams,
) -> Result<RangeSegmentation> {
    let (rows, cols) = (ri.rows(), ri.cols());
    if ground.shape() != (rows, cols) || spec.beams() != rows || spec.azimuth_steps() != cols {
        return Err(Error::ShapeMismatch(format!(
            "range image {rows}x{cols}, ground {}x{}, spec {}x{}",
            ground.rows(),
            ground.cols(),
            spec.beams(),
            spec.azimuth_steps()
        )));
    }
    let eligible = |r: usize, c: usize| ri.is_valid(r, c) && !*ground.get(r, c);
    let h_step = spec.horizontal_step();

    let mut component: Grid<u32> = Grid::filled(rows, cols, 0);
    let mut sizes: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for r0 in 0..rows {
        for c0 in 0..cols {
            if !eligible(r0, c0) || *component.get(r0, c0) != 0 {
                continue;
            }
            sizes.push(0);
            let id = sizes.len() as u32;
            component.set(r0, c0, id);
            queue.push_back((r0, c0));
            while let Some((r, c)) = queue.pop_front() {
                sizes[id as usize - 1] += 1;
                let d = ri.range(r, c);
                for (nr, nc) in neighbors(r, c, rows, cols).into_iter().flatten() {
                    if !eligible(nr, nc) || *component.get(nr, nc) != 0 {
                        continue;
                    }
                    let alpha = if nr == r { h_step } else { spec.vertical_step(r, nr) };
                    if neighbor_angle(d, ri.range(nr, nc), alpha)? > params.theta {
                        component.set(nr, nc, id);
                        queue.push_back((nr, nc));
                    }
                }
            }
        }
    }

    // Renumber the surviving components contiguously, preserving order.
    let mut remap = vec![IGNORE; sizes.len() + 1];
    let mut next = 0usize;
    for (i, &size) in sizes.iter().enumerate() {
        if size >= params.min_segment_size.max(1) {
            next += 1;
            if next > MAX_SEGMENT_ID as usize {
                return Err(Error::InvalidArgument(format!(
                    "more than {MAX_SEGMENT_ID} segments in one scan"
                )));
            }
            remap[i + 1] = next as u16;
        }
    }
    let labels = Grid::from_fn(rows, cols, |r, c| {
        if !ri.is_valid(r, c) {
            IGNORE
        } else if *ground.get(r, c) {
            GROUND
        } else {
            remap[*component.get(r, c) as usize]
        }
    });
    Ok(RangeSegmentation {
        labels,
        segment_count: next,
    })
}
