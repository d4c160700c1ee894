//! Cross-season correspondence generation from multi-traversal 3D
//! reconstructions, correspondence losses for segmentation training, and
//! sliding-window inference fusion.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for common uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
mod error;
pub mod geometry;
pub mod loss;
pub mod matching;
pub mod patch_inference;
pub mod pointcloud;
mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{CameraView, Intrinsics, Pixel, Projection, Quaternion, Vec3, ViewId};
pub use matching::{generate_correspondences, MatchSet, MatchingParams};
pub use pointcloud::{DepthMap, PointCloud};
pub use scalar::Scalar;

pub type Vec3d = Vec3<f64>;
pub type Vec3f = Vec3<f32>;
pub type CameraView64 = CameraView<f64>;
pub type CameraView32 = CameraView<f32>;
pub type PointCloud64 = PointCloud<f64>;
pub type PointCloud32 = PointCloud<f32>;
pub type MatchSet64 = MatchSet<f64>;
pub type FeatureMap64 = loss::FeatureMap<f64>;
pub type FeatureMap32 = loss::FeatureMap<f32>;
pub type ScoreGrid64 = patch_inference::ScoreGrid<f64>;
pub type ScoreGrid32 = patch_inference::ScoreGrid<f32>;
