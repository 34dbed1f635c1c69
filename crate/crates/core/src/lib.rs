//! LiDAR-guided unsupervised semantic segmentation.
//!
//! The pipeline extracts object segments from LiDAR range images, transfers
//! them into the camera image, clusters segment descriptors into
//! pseudo-classes, trains a teacher on the partial pseudo-labels, refines its
//! predictions by majority vote inside each LiDAR segment and distils the
//! refined maps into a student. Evaluation matches pseudo-classes to
//! ground-truth classes with the Hungarian algorithm.

pub mod distill;
pub mod error;
pub mod eval;
pub mod grid;
pub mod pipeline;
pub mod pnm;
pub mod projection;
pub mod pseudolabel;
pub mod rangeseg;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{Grid, LabelGrid, RgbImage, GROUND, IGNORE};
