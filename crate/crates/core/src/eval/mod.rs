//! Evaluation of unsupervised predictions against ground truth.
//!
//! Pseudo-classes carry no semantics, so ground-truth classes are first
//! matched to pseudo-classes by maximum-weight assignment on the confusion
//! matrix. Pixels that land in unmatched pseudo-classes count as false
//! negatives of their ground-truth class.

mod confusion;
mod hungarian;
mod io;
mod knn;
mod metrics;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use hungarian::{hungarian_match, ClassMapping};
pub use io::{write_normalized_csv, write_report};
pub use knn::knn_pixel_classify;
pub use metrics::{evaluate, normalized_confusion_report, EvalReport, NormalizedConfusion};
