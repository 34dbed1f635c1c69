use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::raycast::{cast, Hit};
use super::{Scene, DETAIL_COLOR, GROUND_CLASS, GROUND_COLOR, SKY_COLOR};
use crate::error::{Error, Result};
use crate::grid::{Grid, LabelGrid, RgbImage, IGNORE};
use crate::projection::CameraCalibration;
use crate::rangeseg::{LidarPoint, LidarSpec, PointCloud};
use crate::seed::derive_seed;

pub const SENSOR_ID: &str = "lidar";

/// LiDAR and camera mounted above the world origin, both facing +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorRig {
    pub beams: usize,
    pub lowest_elevation_deg: f64,
    pub highest_elevation_deg: f64,
    pub azimuth_steps: usize,
    pub lidar_height: f64,
    pub camera_height: f64,
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    /// Per-channel Gaussian pixel noise, in 8-bit units.
    pub noise_sigma: f64,
}

impl Default for SensorRig {
    fn default() -> Self {
        Self {
            beams: 32,
            lowest_elevation_deg: -25.0,
            highest_elevation_deg: 5.0,
            azimuth_steps: 360,
            lidar_height: 1.8,
            camera_height: 1.6,
            width: 192,
            height: 128,
            hfov_deg: 90.0,
            noise_sigma: 8.0,
        }
    }
}

impl SensorRig {
    pub fn lidar_spec(&self) -> Result<LidarSpec> {
        LidarSpec::uniform(
            self.beams,
            self.lowest_elevation_deg.to_radians(),
            self.highest_elevation_deg.to_radians(),
            self.azimuth_steps,
        )
    }

    /// Pinhole camera with pixel centres at integer coordinates. The LiDAR
    /// frame (x forward, y left, z up) maps to the camera frame (x right,
    /// y down, z forward), offset by the height difference.
    pub fn calibration(&self) -> Result<CameraCalibration> {
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(Error::InvalidArgument("horizontal field of view must be in (0, 180)".into()));
        }
        let f = self.width as f64 / 2.0 / (self.hfov_deg.to_radians() / 2.0).tan();
        let dz = self.lidar_height - self.camera_height;
        let m = [
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, -dz],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        CameraCalibration::new(
            f,
            f,
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
            self.width,
            self.height,
            m,
            SENSOR_ID,
        )
    }
}

/// A scan and, per point, the instance its ray hit: 0 for ground, `i + 1`
/// for primitive `i`, `None` for rays that hit nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub cloud: PointCloud,
    pub hits: Vec<Option<u16>>,
}

fn instance_of(hit: Hit) -> u16 {
    match hit {
        Hit::Ground(_) => 0,
        Hit::Object(i, _) => i as u16 + 1,
    }
}

fn class_of(scene: &Scene, hit: Hit) -> u16 {
    match hit {
        Hit::Ground(_) => GROUND_CLASS,
        Hit::Object(i, _) => scene.primitives[i].class,
    }
}

pub fn lidar_scan(scene: &Scene, spec: &LidarSpec, sensor_height: f64) -> Result<LidarScan> {
    if !(sensor_height > 0.0) {
        return Err(Error::InvalidArgument("sensor height must be positive".into()));
    }
    let (rows, cols) = (spec.beams(), spec.azimuth_steps());
    let origin = [0.0, 0.0, sensor_height];
    let (points, hits): (Vec<LidarPoint>, Vec<Option<u16>>) = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let d = spec.ray_direction(r, c);
            let hit = cast(origin, d, &scene.primitives);
            let (x, y, z) = match hit {
                Some(h) => (h.t() * d[0], h.t() * d[1], h.t() * d[2]),
                None => (0.0, 0.0, 0.0),
            };
            let p = LidarPoint {
                x,
                y,
                z,
                beam_row: r,
                azimuth_col: c,
                valid: hit.is_some(),
            };
            (p, hit.map(instance_of))
        })
        .unzip();
    Ok(LidarScan {
        cloud: PointCloud {
            sensor_id: SENSOR_ID.to_string(),
            points,
        },
        hits,
    })
}

pub fn simulate_lidar(scene: &Scene, spec: &LidarSpec, sensor_height: f64) -> Result<PointCloud> {
    Ok(lidar_scan(scene, spec, sensor_height)?.cloud)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: RgbImage,
    /// Classes `0..C`, IGNORE for sky.
    pub gt_class: LabelGrid,
    /// 0 for ground, `i + 1` for primitive `i`, IGNORE for sky.
    pub gt_instance: LabelGrid,
}

/// Casts one ray per pixel centre. `lidar_height` places the LiDAR frame in
/// the world; the camera pose follows from the calibration.
pub fn render_camera(
    scene: &Scene,
    calib: &CameraCalibration,
    lidar_height: f64,
    noise_sigma: f64,
) -> Result<Rendered> {
    calib.validate()?;
    let noise = Normal::new(0.0, noise_sigma)
        .map_err(|e| Error::InvalidArgument(format!("pixel noise: {e}")))?;
    let m = &calib.lidar_to_camera;
    // camera centre and ray directions in the LiDAR frame: R^T (p - t)
    let to_lidar = |p: [f64; 3]| -> [f64; 3] {
        std::array::from_fn(|j| (0..3).map(|i| m[i][j] * (p[i] - m[i][3])).sum())
    };
    let rot_t = |d: [f64; 3]| -> [f64; 3] { std::array::from_fn(|j| (0..3).map(|i| m[i][j] * d[i]).sum()) };
    let mut origin = to_lidar([0.0, 0.0, 0.0]);
    origin[2] += lidar_height;

    let (w, h) = (calib.width, calib.height);
    let rows: Vec<Vec<([u8; 3], u16, u16)>> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scene.seed, "pixel-noise", v as u64));
            (0..w)
                .map(|u| {
                    let dir = rot_t(calib.unproject(u as f64, v as f64, 1.0));
                    match cast(origin, dir, &scene.primitives) {
                        None => (SKY_COLOR, IGNORE, IGNORE),
                        Some(hit) => {
                            let base = match hit {
                                Hit::Ground(_) => GROUND_COLOR,
                                Hit::Object(i, t) => {
                                    let p = &scene.primitives[i];
                                    if origin[2] + t * dir[2] < p.detail_top {
                                        DETAIL_COLOR
                                    } else {
                                        p.color
                                    }
                                }
                            };
                            let px = base.map(|c| (c as f64 + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8);
                            (px, class_of(scene, hit), instance_of(hit))
                        }
                    }
                })
                .collect()
        })
        .collect();
    let flat: Vec<_> = rows.into_iter().flatten().collect();
    Ok(Rendered {
        image: Grid::from_vec(h, w, flat.iter().map(|p| p.0).collect()).expect("h * w pixels"),
        gt_class: Grid::from_vec(h, w, flat.iter().map(|p| p.1).collect()).expect("h * w pixels"),
        gt_instance: Grid::from_vec(h, w, flat.iter().map(|p| p.2).collect()).expect("h * w pixels"),
    })
}
