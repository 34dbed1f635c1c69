//! Procedural street-like scenes with a simulated LiDAR and camera.
//!
//! World frame: x forward, y left, z up, ground plane `z = 0`. Both sensors
//! sit above the origin; LiDAR points are stored relative to the LiDAR.

mod io;
mod raycast;
mod sensors;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub use io::{read_meta, write_frame, FrameMeta};
pub use raycast::{cast, ray_box, ray_cylinder, ray_ground, Hit};
pub use sensors::{lidar_scan, render_camera, simulate_lidar, LidarScan, Rendered, SensorRig, SENSOR_ID};

/// Ground-truth class of the ground plane.
pub const GROUND_CLASS: u16 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    Car,
    Pedestrian,
    Pole,
    Wall,
    Bush,
    Sign,
}

impl Archetype {
    pub const ALL: [Archetype; 6] = [
        Archetype::Car,
        Archetype::Pedestrian,
        Archetype::Pole,
        Archetype::Wall,
        Archetype::Bush,
        Archetype::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::Car => "car",
            Archetype::Pedestrian => "pedestrian",
            Archetype::Pole => "pole",
            Archetype::Wall => "wall",
            Archetype::Bush => "bush",
            Archetype::Sign => "sign",
        }
    }

    /// Base colour; chosen far apart so classes separate by appearance.
    pub fn color(self) -> [u8; 3] {
        match self {
            Archetype::Car => [205, 40, 40],
            Archetype::Pedestrian => [235, 205, 50],
            Archetype::Pole => [40, 70, 215],
            Archetype::Wall => [150, 95, 55],
            Archetype::Bush => [35, 165, 55],
            Archetype::Sign => [205, 60, 210],
        }
    }
}

pub const GROUND_COLOR: [u8; 3] = [105, 105, 105];
/// Shared colour of the lower band of every object (tyres, trousers, shaded bases).
pub const DETAIL_COLOR: [u8; 3] = [45, 45, 50];
pub const SKY_COLOR: [u8; 3] = [140, 190, 235];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Box { min: [f64; 3], max: [f64; 3] },
    /// Vertical cylinder.
    Cylinder { center: [f64; 2], radius: f64, z0: f64, z1: f64 },
}

impl Shape {
    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Shape::Box { min, max } => (min, max),
            Shape::Cylinder { center, radius, z0, z1 } => (
                [center[0] - radius, center[1] - radius, z0],
                [center[0] + radius, center[1] + radius, z1],
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub archetype: Archetype,
    /// Ground-truth class id (`1..`).
    pub class: u16,
    pub color: [u8; 3],
    /// Surface below this height is drawn in [`DETAIL_COLOR`].
    pub detail_top: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
    pub seed: u64,
}

/// What to put in a scene. Object classes are numbered from 1 in palette order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub n_objects: usize,
    pub palette: Vec<Archetype>,
    /// Per-object colour offset drawn uniformly from `-jitter..=jitter` per channel.
    pub color_jitter: u8,
    /// Fraction of each object's height, from its base, drawn in the shared
    /// detail colour. Makes single pixels ambiguous while whole objects stay distinct.
    pub detail_fraction: f64,
    /// Object centres are drawn with forward distance in this range (metres).
    pub forward_range: (f64, f64),
    /// Lateral offset bound as a fraction of the forward distance.
    pub lateral_ratio: f64,
    /// Free space kept between object footprints (metres).
    pub gap: f64,
    pub max_attempts: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            n_objects: 6,
            palette: Archetype::ALL.to_vec(),
            color_jitter: 10,
            detail_fraction: 0.3,
            forward_range: (5.0, 18.0),
            lateral_ratio: 0.7,
            gap: 0.4,
            max_attempts: 500,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_objects > 0 && self.palette.is_empty() {
            return Err(Error::InvalidArgument("objects requested with an empty palette".into()));
        }
        let (lo, hi) = self.forward_range;
        if !(lo > 1.0 && hi >= lo) {
            return Err(Error::InvalidArgument(format!(
                "forward range must satisfy 1 < min <= max, got {lo}..{hi}"
            )));
        }
        if !(0.0..=1.0).contains(&self.detail_fraction) {
            return Err(Error::InvalidArgument("detail fraction must be in [0, 1]".into()));
        }
        if !(self.lateral_ratio >= 0.0 && self.gap >= 0.0) {
            return Err(Error::InvalidArgument("lateral ratio and gap must be non-negative".into()));
        }
        Ok(())
    }

    /// Class names indexed by ground-truth class id.
    pub fn class_names(&self) -> Vec<String> {
        std::iter::once("ground".to_string())
            .chain(self.palette.iter().map(|a| a.name().to_string()))
            .collect()
    }

    pub fn class_count(&self) -> usize {
        self.palette.len() + 1
    }
}

fn sample_shape(a: Archetype, x: f64, y: f64, rng: &mut ChaCha8Rng) -> Shape {
    let cuboid = |rng: &mut ChaCha8Rng, len: f64, wid: f64, z0: f64, z1: f64| {
        let (dx, dy) = if rng.random_bool(0.5) { (len, wid) } else { (wid, len) };
        Shape::Box {
            min: [x - dx / 2.0, y - dy / 2.0, z0],
            max: [x + dx / 2.0, y + dy / 2.0, z1],
        }
    };
    match a {
        Archetype::Car => {
            let (l, w, h) = (rng.random_range(3.8..4.6), rng.random_range(1.7..1.9), rng.random_range(1.4..1.6));
            cuboid(rng, l, w, 0.0, h)
        }
        Archetype::Wall => {
            let (l, h) = (rng.random_range(5.0..9.0), rng.random_range(2.0..3.0));
            cuboid(rng, l, 0.3, 0.0, h)
        }
        Archetype::Bush => {
            let (l, w, h) = (rng.random_range(1.0..2.0), rng.random_range(1.0..2.0), rng.random_range(0.8..1.3));
            cuboid(rng, l, w, 0.0, h)
        }
        Archetype::Sign => {
            // a flat panel facing the sensors, mounted above head height
            let (w, h, z0) = (rng.random_range(0.7..1.1), rng.random_range(0.6..0.8), rng.random_range(1.9..2.4));
            Shape::Box {
                min: [x - 0.05, y - w / 2.0, z0],
                max: [x + 0.05, y + w / 2.0, z0 + h],
            }
        }
        Archetype::Pedestrian => Shape::Cylinder {
            center: [x, y],
            radius: rng.random_range(0.25..0.35),
            z0: 0.0,
            z1: rng.random_range(1.6..1.9),
        },
        Archetype::Pole => Shape::Cylinder {
            center: [x, y],
            radius: rng.random_range(0.1..0.15),
            z0: 0.0,
            z1: rng.random_range(4.0..6.0),
        },
    }
}

fn footprints_overlap(a: &Shape, b: &Shape, gap: f64) -> bool {
    let ((amin, amax), (bmin, bmax)) = (a.bounds(), b.bounds());
    (0..2).all(|i| amin[i] < bmax[i] + gap && bmin[i] < amax[i] + gap)
}

/// Seeded scene with `spec.n_objects` primitives on non-overlapping footprints.
pub fn generate_scene(seed: u64, spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut primitives: Vec<Primitive> = Vec::with_capacity(spec.n_objects);
    for _ in 0..spec.n_objects {
        let idx = rng.random_range(0..spec.palette.len());
        let archetype = spec.palette[idx];
        let j = spec.color_jitter as i32;
        let color = archetype
            .color()
            .map(|c| (c as i32 + rng.random_range(-j..=j)).clamp(0, 255) as u8);
        let mut placed = None;
        for _ in 0..spec.max_attempts {
            let x = rng.random_range(spec.forward_range.0..=spec.forward_range.1);
            let lat = spec.lateral_ratio * x;
            let y = rng.random_range(-lat..=lat);
            let shape = sample_shape(archetype, x, y, &mut rng);
            let (min, _) = shape.bounds();
            let clear = min[0] > 1.0 && primitives.iter().all(|p| !footprints_overlap(&p.shape, &shape, spec.gap));
            if clear {
                placed = Some(shape);
                break;
            }
        }
        let shape = placed.ok_or(Error::PlacementFailed {
            attempts: spec.max_attempts,
        })?;
        let (min, max) = shape.bounds();
        primitives.push(Primitive {
            shape,
            archetype,
            class: idx as u16 + 1,
            color,
            detail_top: min[2] + spec.detail_fraction * (max[2] - min[2]),
        });
    }
    Ok(Scene { primitives, seed })
}

/// Everything simulated for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub frame_id: String,
    pub scene: Scene,
    pub class_names: Vec<String>,
    pub rig: SensorRig,
    pub scan: LidarScan,
    pub rendered: Rendered,
}

/// Settings for a batch of frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub frames: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub scene: SceneSpec,
    pub rig: SensorRig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frames: 20,
            min_objects: 4,
            max_objects: 8,
            scene: SceneSpec::default(),
            rig: SensorRig::default(),
        }
    }
}

/// Frame `index` of the batch rooted at `root_seed`.
pub fn generate_frame(root_seed: u64, index: usize, config: &SynthConfig) -> Result<SimFrame> {
    if config.min_objects > config.max_objects {
        return Err(Error::InvalidArgument("min_objects exceeds max_objects".into()));
    }
    let seed = derive_seed(root_seed, "synth", index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = SceneSpec {
        n_objects: rng.random_range(config.min_objects..=config.max_objects),
        ..config.scene.clone()
    };
    let scene = generate_scene(derive_seed(seed, "scene", 0), &spec)?;
    let scan = lidar_scan(&scene, &config.rig.lidar_spec()?, config.rig.lidar_height)?;
    let calib = config.rig.calibration()?;
    let rendered = render_camera(&scene, &calib, config.rig.lidar_height, config.rig.noise_sigma)?;
    Ok(SimFrame {
        frame_id: format!("{index:06}"),
        scene,
        class_names: spec.class_names(),
        rig: config.rig.clone(),
        scan,
        rendered,
    })
}
