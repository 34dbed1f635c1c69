use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PixelProjection, Z_MIN};
use crate::error::{Error, Result};

/// Pinhole intrinsics plus the rigid transform from the LiDAR frame into the
/// camera frame (x right, y down, z forward).
#[derive(Debug, Clone, PartialEq)]
pub struct CameraCalibration {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub lidar_to_camera: [[f64; 4]; 4],
    /// Frame id the extrinsics map from; must match the point cloud's sensor id.
    pub source_frame: String,
}

impl CameraCalibration {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        lidar_to_camera: [[f64; 4]; 4],
        source_frame: impl Into<String>,
    ) -> Result<Self> {
        let calib = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            lidar_to_camera,
            source_frame: source_frame.into(),
        };
        calib.validate()?;
        Ok(calib)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidArgument("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("image extent must be non-empty".into()));
        }
        let m = &self.lidar_to_camera;
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("extrinsics must be finite".into()));
        }
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidArgument(
                "extrinsics last row must be [0, 0, 0, 1]".into(),
            ));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[i][k] * m[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(
                        "extrinsic rotation is not orthonormal".into(),
                    ));
                }
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if det <= 0.0 {
            return Err(Error::InvalidArgument(
                "extrinsic rotation must have determinant +1".into(),
            ));
        }
        Ok(())
    }

    pub fn transform_point(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.lidar_to_camera;
        std::array::from_fn(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + m[i][3])
    }

    /// Pinhole projection of a camera-frame point; `None` when behind the
    /// near plane or outside the image.
    pub fn project_point(&self, p: [f64; 3]) -> Option<PixelProjection> {
        let [x, y, z] = p;
        if !(z > Z_MIN) {
            return None;
        }
        let u = self.fx * x / z + self.cx;
        let v = self.fy * y / z + self.cy;
        let inside = (0.0..self.width as f64).contains(&u) && (0.0..self.height as f64).contains(&v);
        inside.then_some(PixelProjection { u, v, depth: z })
    }

    /// Camera-frame point at `depth` along the ray through `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> [f64; 3] {
        [
            (u - self.cx) / self.fx * depth,
            (v - self.cy) / self.fy * depth,
            depth,
        ]
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibFile {
    intrinsics: Intrinsics,
    extrinsics: Extrinsics,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Intrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Extrinsics {
    /// Row-major 4x4.
    matrix: Vec<f64>,
    #[serde(default = "default_frame")]
    source_frame: String,
}

fn default_frame() -> String {
    "lidar".into()
}

pub fn write_calibration(path: &Path, calib: &CameraCalibration) -> Result<()> {
    let file = CalibFile {
        intrinsics: Intrinsics {
            fx: calib.fx,
            fy: calib.fy,
            cx: calib.cx,
            cy: calib.cy,
            width: calib.width,
            height: calib.height,
        },
        extrinsics: Extrinsics {
            matrix: calib.lidar_to_camera.iter().flatten().copied().collect(),
            source_frame: calib.source_frame.clone(),
        },
    };
    let text = toml::to_string(&file).map_err(|e| Error::format("calibration", e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_calibration(path: &Path) -> Result<CameraCalibration> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CalibFile = toml::from_str(&text)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    let m = &file.extrinsics.matrix;
    if m.len() != 16 {
        return Err(Error::format(
            path.display().to_string(),
            format!("extrinsics matrix needs 16 values, found {}", m.len()),
        ));
    }
    let matrix = std::array::from_fn(|i| std::array::from_fn(|j| m[4 * i + j]));
    let i = file.intrinsics;
    CameraCalibration::new(
        i.fx,
        i.fy,
        i.cx,
        i.cy,
        i.width,
        i.height,
        matrix,
        file.extrinsics.source_frame,
    )
}
