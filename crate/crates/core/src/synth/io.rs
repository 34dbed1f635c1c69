use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SensorRig, SimFrame};
use crate::error::{Error, Result};
use crate::pnm::{write_pgm16, write_ppm};
use crate::projection::write_calibration;
use crate::rangeseg::{write_cloud_csv, LidarSpec};

/// Contents of a frame's `meta.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameMeta {
    pub frame_id: String,
    pub sensor_id: String,
    pub scene_seed: u64,
    pub object_count: usize,
    pub lidar_height: f64,
    pub class_names: Vec<String>,
    pub rig: SensorRig,
    pub lidar: LidarSpec,
}

/// Writes `cloud.csv`, `calib.toml`, `image.ppm`, `gt_class.pgm`,
/// `gt_instance.pgm` and `meta.toml` into `dir`, creating it if needed.
pub fn write_frame(dir: &Path, frame: &SimFrame) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_cloud_csv(&dir.join("cloud.csv"), &frame.scan.cloud)?;
    write_calibration(&dir.join("calib.toml"), &frame.rig.calibration()?)?;
    write_ppm(&dir.join("image.ppm"), &frame.rendered.image)?;
    write_pgm16(&dir.join("gt_class.pgm"), &frame.rendered.gt_class)?;
    write_pgm16(&dir.join("gt_instance.pgm"), &frame.rendered.gt_instance)?;
    let meta = FrameMeta {
        frame_id: frame.frame_id.clone(),
        sensor_id: frame.scan.cloud.sensor_id.clone(),
        scene_seed: frame.scene.seed,
        object_count: frame.scene.primitives.len(),
        lidar_height: frame.rig.lidar_height,
        class_names: frame.class_names.clone(),
        rig: frame.rig.clone(),
        lidar: frame.rig.lidar_spec()?,
    };
    let path = dir.join("meta.toml");
    let text = toml::to_string(&meta).map_err(|e| Error::format("meta.toml", e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_meta(path: &Path) -> Result<FrameMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta: FrameMeta = toml::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    meta.lidar.validate()?;
    Ok(meta)
}
