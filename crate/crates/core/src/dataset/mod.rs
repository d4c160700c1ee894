//! Serialization of correspondence samples, ingestion of poses, clouds and
//! depth maps, and per-condition dataset statistics.

mod files;
mod poses;
mod sample;
mod stats;

pub use files::{
    read_cloud, read_depth_map, read_fused_scores, read_manifest, read_patch_scores, write_cloud, write_depth_map,
    write_fused_scores, write_manifest, write_patch_scores, PatchScores,
};
pub use poses::{read_poses, write_poses, ViewCatalog};
pub use sample::{read_sample, sample_to_string, validate_condition_tag, write_sample, CorrespondenceSample, ImageRef};
pub use stats::{compute_statistics, ConditionStats, DatasetStats};
