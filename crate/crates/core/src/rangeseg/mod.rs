//! Range images and geometric LiDAR segmentation.
//!
//! A scan is organised as a `beams x azimuth_steps` range image. Ground is
//! extracted first by a breadth-first flood from the lowest beams over cells
//! whose vertical inclination is small; the remaining cells are then grouped
//! into object segments by a second breadth-first search that links
//! neighbours whose angle criterion exceeds a threshold.

mod ground;
mod io;
mod objects;

pub use ground::{segment_ground, GroundParams};
pub use io::{read_cloud_csv, write_cloud_csv};
pub use objects::{neighbor_angle, segment_objects, RangeSegmentation, SegParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub beam_row: usize,
    pub azimuth_col: usize,
    pub valid: bool,
}

impl LidarPoint {
    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub sensor_id: String,
    pub points: Vec<LidarPoint>,
}

/// Geometry of a spinning multi-beam sensor.
///
/// Beam `r` points at `elevations[r]`; azimuth column `c` points at
/// `azimuth_origin + c * azimuth_span / azimuth_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarSpec {
    elevations: Vec<f64>,
    azimuth_steps: usize,
    azimuth_origin: f64,
    azimuth_span: f64,
}

impl LidarSpec {
    pub fn new(
        elevations: Vec<f64>,
        azimuth_steps: usize,
        azimuth_origin: f64,
        azimuth_span: f64,
    ) -> Result<Self> {
        let spec = Self {
            elevations,
            azimuth_steps,
            azimuth_origin,
            azimuth_span,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Evenly spaced beams from `lowest` to `highest` (radians), ordered top row first.
    pub fn uniform(beams: usize, lowest: f64, highest: f64, azimuth_steps: usize) -> Result<Self> {
        if beams < 2 {
            return Err(Error::InvalidArgument("a lidar needs at least 2 beams".into()));
        }
        let step = (highest - lowest) / (beams - 1) as f64;
        let elevations = (0..beams).map(|r| highest - step * r as f64).collect();
        Self::new(elevations, azimuth_steps, 0.0, std::f64::consts::TAU)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elevations.len() < 2 {
            return Err(Error::InvalidArgument("a lidar needs at least 2 beams".into()));
        }
        if self.azimuth_steps < 2 {
            return Err(Error::InvalidArgument(
                "a lidar needs at least 2 azimuth steps".into(),
            ));
        }
        if !(self.azimuth_span > 0.0 && self.azimuth_span.is_finite()) {
            return Err(Error::InvalidArgument("azimuth span must be positive".into()));
        }
        let increasing = self.elevations.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.elevations.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Error::InvalidArgument(
                "elevation angles must be strictly monotone".into(),
            ));
        }
        Ok(())
    }

    pub fn beams(&self) -> usize {
        self.elevations.len()
    }

    pub fn azimuth_steps(&self) -> usize {
        self.azimuth_steps
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    pub fn elevation(&self, row: usize) -> f64 {
        self.elevations[row]
    }

    pub fn azimuth(&self, col: usize) -> f64 {
        self.azimuth_origin + col as f64 * self.horizontal_step()
    }

    pub fn azimuth_origin(&self) -> f64 {
        self.azimuth_origin
    }

    pub fn azimuth_span(&self) -> f64 {
        self.azimuth_span
    }

    /// Angular distance between horizontally adjacent cells.
    pub fn horizontal_step(&self) -> f64 {
        self.azimuth_span / self.azimuth_steps as f64
    }

    /// Angular distance between beams `a` and `b`.
    pub fn vertical_step(&self, a: usize, b: usize) -> f64 {
        (self.elevations[a] - self.elevations[b]).abs()
    }

    /// Unit direction of the ray through cell `(row, col)` in the sensor frame.
    pub fn ray_direction(&self, row: usize, col: usize) -> [f64; 3] {
        let (el, az) = (self.elevation(row), self.azimuth(col));
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    }

    /// Row of the lowest beam.
    pub fn bottom_row(&self) -> usize {
        if self.elevations[0] < self.elevations[self.beams() - 1] {
            0
        } else {
            self.beams() - 1
        }
    }

    /// Rows ordered from the lowest beam upwards.
    pub(crate) fn rows_bottom_up(&self) -> Vec<usize> {
        let b = self.beams();
        if self.bottom_row() == 0 {
            (0..b).collect()
        } else {
            (0..b).rev().collect()
        }
    }
}

/// Per-cell ranges of one scan. Invalid cells hold range `0.0` and no point index.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    ranges: Grid<f64>,
    point_index: Grid<Option<usize>>,
}

impl RangeImage {
    pub fn empty(beams: usize, azimuth_steps: usize) -> Self {
        Self {
            ranges: Grid::filled(beams, azimuth_steps, 0.0),
            point_index: Grid::filled(beams, azimuth_steps, None),
        }
    }

    pub fn rows(&self) -> usize {
        self.ranges.rows()
    }

    pub fn cols(&self) -> usize {
        self.ranges.cols()
    }

    pub fn ranges(&self) -> &Grid<f64> {
        &self.ranges
    }

    pub fn range(&self, row: usize, col: usize) -> f64 {
        *self.ranges.get(row, col)
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.point_index.get(row, col).is_some()
    }

    pub fn point_index(&self, row: usize, col: usize) -> Option<usize> {
        *self.point_index.get(row, col)
    }

    pub fn validity(&self) -> Grid<bool> {
        self.point_index.map(Option::is_some)
    }

    pub fn valid_count(&self) -> usize {
        self.point_index.as_slice().iter().filter(|p| p.is_some()).count()
    }

    /// Sets a valid measurement. `range` must be positive and finite.
    pub fn set_valid(&mut self, row: usize, col: usize, range: f64, point: usize) {
        debug_assert!(range > 0.0 && range.is_finite());
        self.ranges.set(row, col, range);
        self.point_index.set(row, col, Some(point));
    }

    /// Cartesian point of a valid cell, reconstructed from the sensor geometry.
    pub(crate) fn cell_point(&self, spec: &LidarSpec, row: usize, col: usize) -> [f64; 3] {
        let d = spec.ray_direction(row, col);
        let r = self.range(row, col);
        [d[0] * r, d[1] * r, d[2] * r]
    }
}

/// Rasterises a point cloud into a range image.
///
/// Invalid points and points with a zero or non-finite norm leave their cell
/// invalid; two points landing in the same cell is an error.
pub fn build_range_image(pc: &PointCloud, spec: &LidarSpec) -> Result<RangeImage> {
    let (rows, cols) = (spec.beams(), spec.azimuth_steps());
    let mut ri = RangeImage::empty(rows, cols);
    let mut seen: Grid<Option<usize>> = Grid::filled(rows, cols, None);
    for (i, p) in pc.points.iter().enumerate() {
        if p.beam_row >= rows || p.azimuth_col >= cols {
            return Err(Error::CellOutOfBounds {
                index: i,
                row: p.beam_row,
                col: p.azimuth_col,
                rows,
                cols,
            });
        }
        if let Some(first) = *seen.get(p.beam_row, p.azimuth_col) {
            return Err(Error::DuplicateCell {
                first,
                second: i,
                row: p.beam_row,
                col: p.azimuth_col,
            });
        }
        seen.set(p.beam_row, p.azimuth_col, Some(i));
        if !p.valid {
            continue;
        }
        let range = (p.x * p.x + p.y * p.y + p.z * p.z).sqrt();
        if range > 0.0 && range.is_finite() {
            ri.set_valid(p.beam_row, p.azimuth_col, range, i);
        }
    }
    Ok(ri)
}

/// 4-neighbourhood with azimuth wrap-around.
pub(crate) fn neighbors(row: usize, col: usize, rows: usize, cols: usize) -> [Option<(usize, usize)>; 4] {
    [
        (row > 0).then(|| (row - 1, col)),
        (row + 1 < rows).then(|| (row + 1, col)),
        Some((row, (col + cols - 1) % cols)),
        Some((row, (col + 1) % cols)),
    ]
}
