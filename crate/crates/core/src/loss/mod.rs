//! Correspondence losses, supervised cross-entropy, training schedule helpers
//! and mIoU, with analytic gradients and no autodiff framework.

mod cross_entropy;
mod feature_map;
pub mod gradcheck;
mod hinge;
mod metrics;
mod schedule;

pub use cross_entropy::{ce_corr_loss, supervised_ce_loss, CeOutput};
pub use feature_map::{FeatureKind, FeatureMap, LabelMap, IGNORE_LABEL};
pub use hinge::{hinge_corr_loss, margin_angle_degrees, HingeOutput};
pub use metrics::{mean_iou, ConfusionMatrix};
pub use schedule::{
    filter_nonstationary, nonstationary_classes, total_loss, warmup_gate, CorrLossConfig, CITYSCAPES_CLASSES,
};

/// Feature vectors shorter than this are treated as zero.
pub const EPSILON_NORM: f64 = 1e-12;
/// Probabilities are clamped to at least this before taking the log.
pub const EPSILON_LOG: f64 = 1e-12;
