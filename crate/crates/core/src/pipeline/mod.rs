//! Stage orchestration over a directory of plain-file artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.toml
//! frames/<id>/   cloud.csv calib.toml image.ppm gt_class.pgm gt_instance.pgm meta.toml
//!                range_seg.pgm image_seg.pgm pseudo.pgm teacher_pred.pgm refined.pgm
//! features.csv clusters.csv teacher.bin teacher_log.csv student.bin student_log.csv
//! eval/          {teacher,student,refined}_report.toml {teacher,student,refined}_confusion.csv
//!                refinement.toml
//! ```

mod config;
mod manifest;
mod stages;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use config::{ClusterConfig, PipelineConfig, RefineConfig};
pub use manifest::{FrameEntry, FrameManifest};
pub use stages::{evaluate_run, CoverageComparison, EvalSummary};

use crate::error::{Error, Result};
use crate::eval::EvalReport;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "DSEG_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Synth,
    Segment,
    Project,
    Cluster,
    TrainTeacher,
    Refine,
    TrainStudent,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Segment,
        Stage::Project,
        Stage::Cluster,
        Stage::TrainTeacher,
        Stage::Refine,
        Stage::TrainStudent,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Segment => "segment",
            Stage::Project => "project",
            Stage::Cluster => "cluster",
            Stage::TrainTeacher => "train-teacher",
            Stage::Refine => "refine",
            Stage::TrainStudent => "train-student",
            Stage::Eval => "eval",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage `{s}`")))
    }
}

/// Where a stage reads and writes.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    pub manifest: PathBuf,
}

impl RunContext {
    /// Output under `config.out_dir`, manifest at `<out>/manifest.toml`.
    pub fn new(config: PipelineConfig) -> Self {
        let out_dir = config.out_dir.clone();
        Self::with_paths(config, out_dir, None)
    }

    pub fn with_paths(config: PipelineConfig, out_dir: PathBuf, manifest: Option<PathBuf>) -> Self {
        let manifest = manifest.unwrap_or_else(|| out_dir.join("manifest.toml"));
        Self {
            config,
            out_dir,
            manifest,
        }
    }

    pub fn frame_dir(&self, id: &str) -> PathBuf {
        self.out_dir.join("frames").join(id)
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub fn run_stage(stage: Stage, ctx: &RunContext) -> Result<()> {
    match stage {
        Stage::Synth => stages::synth(ctx),
        Stage::Segment => stages::segment(ctx),
        Stage::Project => stages::project(ctx),
        Stage::Cluster => stages::cluster(ctx),
        Stage::TrainTeacher => stages::train_teacher(ctx),
        Stage::Refine => stages::refine(ctx),
        Stage::TrainStudent => stages::train_student(ctx),
        Stage::Eval => evaluate_run(ctx).map(|_| ()),
    }
}

/// Runs every stage in order and returns the student's report.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvalReport> {
    run_all(&RunContext::new(config.clone())).map(|s| s.student)
}

/// Runs every stage in order and returns all evaluation results.
pub fn run_all(ctx: &RunContext) -> Result<EvalSummary> {
    for stage in &Stage::ALL[..Stage::ALL.len() - 1] {
        run_stage(*stage, ctx)?;
    }
    evaluate_run(ctx)
}

/// Thread cap from `DSEG_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub(crate) fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_roundtrip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("train".parse::<Stage>().is_err());
    }

    #[test]
    fn explicit_pool_runs() {
        assert_eq!(with_threads(Some(2), rayon::current_num_threads).unwrap(), 2);
    }
}
