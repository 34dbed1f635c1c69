//! Transfer of range-image segments into the camera image.

mod calib;
mod densify;

pub use calib::{read_calibration, write_calibration, CameraCalibration};
pub use densify::{densify, DensifyParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, LabelGrid, IGNORE};
use crate::rangeseg::{LidarSpec, PointCloud, RangeSegmentation};

/// Per-pixel segment ids (`IGNORE`, `GROUND` or `1..=J`).
pub type ImageSegmentMap = LabelGrid;

/// Points closer to the image plane than this are dropped (meters).
pub const Z_MIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelProjection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl PixelProjection {
    /// Round-to-nearest pixel, clamped into `[0, width) x [0, height)`.
    pub fn pixel(&self, width: usize, height: usize) -> (usize, usize) {
        let u = (self.u.round() as usize).min(width - 1);
        let v = (self.v.round() as usize).min(height - 1);
        (u, v)
    }
}

/// A projected label at integer pixel `(u, v)` with its camera depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseEntry {
    pub u: usize,
    pub v: usize,
    pub label: u16,
    pub depth: f64,
}

/// At most one entry per pixel, sorted row-major by `(v, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLabelImage {
    pub width: usize,
    pub height: usize,
    pub entries: Vec<SparseEntry>,
}

impl SparseLabelImage {
    /// Builds an image from raw deposits, keeping the nearest deposit per
    /// pixel (ties: smaller label).
    pub fn from_deposits(
        width: usize,
        height: usize,
        deposits: impl IntoIterator<Item = SparseEntry>,
    ) -> Result<Self> {
        let mut zbuf: Grid<Option<SparseEntry>> = Grid::filled(height, width, None);
        for e in deposits {
            if e.u >= width || e.v >= height {
                return Err(Error::InvalidArgument(format!(
                    "entry at ({}, {}) outside {width}x{height}",
                    e.u, e.v
                )));
            }
            let slot = zbuf.get_mut(e.v, e.u);
            let replace = match slot {
                None => true,
                Some(cur) => (e.depth, e.label) < (cur.depth, cur.label),
            };
            if replace {
                *slot = Some(e);
            }
        }
        Ok(Self {
            width,
            height,
            entries: zbuf.into_vec().into_iter().flatten().collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectParams {
    /// Deposit IGNORE markers where the range image has no return.
    pub project_invalid: bool,
    /// Range (meters) at which no-return rays are placed for projection.
    pub invalid_range: f64,
}

impl Default for ProjectParams {
    fn default() -> Self {
        Self {
            project_invalid: true,
            invalid_range: 1000.0,
        }
    }
}

/// Projects every valid in-view point with its segment label, z-buffered.
pub fn project_segments(
    seg: &RangeSegmentation,
    pc: &PointCloud,
    spec: &LidarSpec,
    calib: &CameraCalibration,
    params: &ProjectParams,
) -> Result<SparseLabelImage> {
    if pc.sensor_id != calib.source_frame {
        return Err(Error::FrameMismatch {
            expected: calib.source_frame.clone(),
            found: pc.sensor_id.clone(),
        });
    }
    let (rows, cols) = (spec.beams(), spec.azimuth_steps());
    if seg.labels.shape() != (rows, cols) {
        return Err(Error::ShapeMismatch(format!(
            "segmentation is {}x{}, lidar is {rows}x{cols}",
            seg.labels.rows(),
            seg.labels.cols()
        )));
    }
    let (w, h) = (calib.width, calib.height);
    let mut covered = Grid::filled(rows, cols, false);
    let mut deposits = Vec::new();
    for p in &pc.points {
        if p.beam_row >= rows || p.azimuth_col >= cols {
            return Err(Error::CellOutOfBounds {
                index: deposits.len(),
                row: p.beam_row,
                col: p.azimuth_col,
                rows,
                cols,
            });
        }
        let norm2 = p.x * p.x + p.y * p.y + p.z * p.z;
        if !p.valid || !(norm2 > 0.0 && norm2.is_finite()) {
            continue;
        }
        covered.set(p.beam_row, p.azimuth_col, true);
        if let Some(proj) = calib.project_point(calib.transform_point(p.xyz())) {
            let (u, v) = proj.pixel(w, h);
            deposits.push(SparseEntry {
                u,
                v,
                label: *seg.labels.get(p.beam_row, p.azimuth_col),
                depth: proj.depth,
            });
        }
    }
    if params.project_invalid {
        for r in 0..rows {
            for c in 0..cols {
                if *covered.get(r, c) {
                    continue;
                }
                let d = spec.ray_direction(r, c);
                let far = d.map(|x| x * params.invalid_range);
                if let Some(proj) = calib.project_point(calib.transform_point(far)) {
                    let (u, v) = proj.pixel(w, h);
                    deposits.push(SparseEntry {
                        u,
                        v,
                        label: IGNORE,
                        depth: proj.depth,
                    });
                }
            }
        }
    }
    SparseLabelImage::from_deposits(w, h, deposits)
}
