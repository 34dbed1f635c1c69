//! Teacher/student training on partial pseudo-labels.
//!
//! The teacher is fitted with a cross-entropy restricted to pseudo-labelled
//! pixels. Its dense predictions are then made piecewise constant inside
//! every LiDAR segment by majority vote, and the student is fitted to those
//! refined maps with a plain per-pixel cross-entropy.

mod classifier;
mod features;
mod loss;
mod refine;
mod train;

pub use classifier::{
    classifier_forward, log_softmax, read_classifier, softmax, write_classifier, ClassifierParams,
    PixelPredictionMap,
};
pub use features::{pixel_features, PixelFeatureMap, PIXEL_FEATURE_DIM};
pub use loss::{student_loss, teacher_loss, valid_mask, LossOutput};
pub use refine::{refine_predictions, RefinedMap};
pub use train::{train, write_training_log, LogEntry, Optimizer, Target, TrainHyper, TrainResult};
