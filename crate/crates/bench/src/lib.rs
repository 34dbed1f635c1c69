//! Fixtures shared by the benchmarks.

use dseg_core::projection::{project_segments, CameraCalibration, ProjectParams};
use dseg_core::rangeseg::{
    build_range_image, segment_ground, segment_objects, GroundParams, LidarSpec, PointCloud, RangeImage,
    RangeSegmentation, SegParams,
};
use dseg_core::synth::{generate_frame, SimFrame, SynthConfig};

/// One synthetic frame with every intermediate product precomputed.
pub struct Fixture {
    pub frame: SimFrame,
    pub spec: LidarSpec,
    pub calib: CameraCalibration,
    pub cloud: PointCloud,
    pub range: RangeImage,
    pub ground: dseg_core::Grid<bool>,
    pub segmentation: RangeSegmentation,
}

impl Fixture {
    pub fn new(seed: u64) -> Self {
        let config = SynthConfig::default();
        let frame = generate_frame(seed, 0, &config).expect("frame");
        let spec = config.rig.lidar_spec().expect("spec");
        let calib = config.rig.calibration().expect("calibration");
        let cloud = frame.scan.cloud.clone();
        let range = build_range_image(&cloud, &spec).expect("range image");
        let ground = segment_ground(&range, &spec, &GroundParams::default());
        let segmentation = segment_objects(&range, &spec, &ground, &SegParams::default()).expect("segments");
        Self {
            frame,
            spec,
            calib,
            cloud,
            range,
            ground,
            segmentation,
        }
    }

    pub fn sparse_labels(&self) -> dseg_core::projection::SparseLabelImage {
        project_segments(&self.segmentation, &self.cloud, &self.spec, &self.calib, &ProjectParams::default())
            .expect("projection")
    }
}
