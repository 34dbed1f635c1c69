use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{neighbors, LidarSpec, RangeImage};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundParams {
    /// Largest vertical inclination (radians) of a ground cell.
    pub ground_angle_threshold: f64,
    /// Largest height jump (meters) between two ground cells joined by the flood.
    pub max_height_step: f64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            ground_angle_threshold: 5f64.to_radians(),
            max_height_step: 0.3,
        }
    }
}

/// Angle of `b - a` against the horizontal plane, in `[0, pi/2]`.
fn inclination(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dz = (b[2] - a[2]).abs();
    let dxy = (b[0] - a[0]).hypot(b[1] - a[1]);
    dz.atan2(dxy)
}

/// Flags ground cells of `ri`.
///
/// A valid cell is ground-like when the displacement to at least one valid
/// vertical neighbour is within `ground_angle_threshold` of horizontal. The
/// flood starts at the lowest valid cell of every column (when ground-like)
/// and spreads to ground-like 4-neighbours whose height differs by at most
/// `max_height_step`.
pub fn segment_ground(ri: &RangeImage, spec: &LidarSpec, params: &GroundParams) -> Grid<bool> {
    let (rows, cols) = (ri.rows(), ri.cols());
    let points = Grid::from_fn(rows, cols, |r, c| {
        ri.is_valid(r, c).then(|| ri.cell_point(spec, r, c))
    });

    let ground_like = Grid::from_fn(rows, cols, |r, c| {
        let Some(p) = *points.get(r, c) else {
            return false;
        };
        [r.checked_sub(1), (r + 1 < rows).then_some(r + 1)]
            .into_iter()
            .flatten()
            .filter_map(|rr| *points.get(rr, c))
            .any(|q| inclination(p, q) <= params.ground_angle_threshold)
    });

    let mut ground = Grid::filled(rows, cols, false);
    let mut queue = VecDeque::new();
    let order = spec.rows_bottom_up();
    for c in 0..cols {
        if let Some(&r) = order.iter().find(|&&r| ri.is_valid(r, c)) {
            if *ground_like.get(r, c) {
                ground.set(r, c, true);
                queue.push_back((r, c));
            }
        }
    }

    while let Some((r, c)) = queue.pop_front() {
        let p = points.get(r, c).expect("ground cells are valid");
        for (nr, nc) in neighbors(r, c, rows, cols).into_iter().flatten() {
            if *ground.get(nr, nc) || !*ground_like.get(nr, nc) {
                continue;
            }
            let q = points.get(nr, nc).expect("ground-like cells are valid");
            if (q[2] - p[2]).abs() <= params.max_height_step {
                ground.set(nr, nc, true);
                queue.push_back((nr, nc));
            }
        }
    }
    ground
}
