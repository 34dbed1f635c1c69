use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distill::TrainHyper;
use crate::error::{Error, Result};
use crate::projection::{DensifyParams, ProjectParams};
use crate::pseudolabel::{FeatureParams, KMeansParams};
use crate::rangeseg::{GroundParams, SegParams};
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Number of pseudo-classes.
    pub k: usize,
    /// Image segments with fewer pixels are not labelled.
    pub min_segment_pixels: usize,
    /// Treat each frame's ground region as one more segment to cluster.
    pub include_ground: bool,
    /// Precomputed segment descriptors (`frame_id,segment_id,f0,...`) used
    /// instead of the built-in ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external_features: Option<PathBuf>,
    pub kmeans: KMeansParams,
    pub features: FeatureParams,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 30,
            min_segment_pixels: 16,
            include_ground: true,
            external_features: None,
            kmeans: KMeansParams::default(),
            features: FeatureParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Vote inside the ground region as well as inside object segments.
    pub include_ground: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { include_ground: true }
    }
}

/// Every tunable of a run. All stage seeds derive from `seed`.
///
/// Training defaults follow the reference recipe (learning rate 2e-4,
/// batch 32); random crops (512 px in the reference recipe) are off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub synth: SynthConfig,
    pub ground: GroundParams,
    pub segment: SegParams,
    pub project: ProjectParams,
    pub densify: DensifyParams,
    pub cluster: ClusterConfig,
    pub teacher: TrainHyper,
    pub refine: RefineConfig,
    pub student: TrainHyper,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("dseg-out"),
            synth: SynthConfig::default(),
            ground: GroundParams::default(),
            segment: SegParams::default(),
            project: ProjectParams::default(),
            densify: DensifyParams::default(),
            cluster: ClusterConfig::default(),
            teacher: TrainHyper::default(),
            refine: RefineConfig::default(),
            student: TrainHyper::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
