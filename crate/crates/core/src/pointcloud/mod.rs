//! Per-traversal point clouds with per-point visibility sets.

mod fusion;
mod kdtree;
mod visibility;

pub use fusion::{fuse_depth_maps, FusionConfig};
pub use kdtree::SpatialIndex;
pub use visibility::{annotate_visibility, compute_visibility, DEFAULT_REL_DEPTH_TOL};

use crate::error::{Error, Result};
use crate::geometry::{Vec3, ViewId};
use crate::scalar::Scalar;

/// 3D points of one traversal. `visibility[i]` is the sorted, deduplicated
/// list of views that observe point `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud<T = f64> {
    traversal_id: String,
    positions: Vec<Vec3<T>>,
    visibility: Vec<Vec<ViewId>>,
}

impl<T: Scalar> PointCloud<T> {
    pub fn new(
        traversal_id: impl Into<String>,
        positions: Vec<Vec3<T>>,
        mut visibility: Vec<Vec<ViewId>>,
    ) -> Result<Self> {
        if positions.len() != visibility.len() {
            return Err(Error::invalid(format!(
                "{} positions but {} visibility sets",
                positions.len(),
                visibility.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("point {i} is not finite")));
        }
        for vis in &mut visibility {
            vis.sort_unstable();
            vis.dedup();
        }
        Ok(Self {
            traversal_id: traversal_id.into(),
            positions,
            visibility,
        })
    }

    /// Cloud without visibility information, e.g. an aligned LIDAR scan.
    pub fn from_positions(traversal_id: impl Into<String>, positions: Vec<Vec3<T>>) -> Result<Self> {
        let n = positions.len();
        Self::new(traversal_id, positions, vec![Vec::new(); n])
    }

    pub fn traversal_id(&self) -> &str {
        &self.traversal_id
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3<T>] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Vec3<T> {
        self.positions[i]
    }

    pub fn visibility(&self) -> &[Vec<ViewId>] {
        &self.visibility
    }

    pub fn visible_in(&self, i: usize) -> &[ViewId] {
        &self.visibility[i]
    }

    pub fn is_visible_in(&self, i: usize, view: ViewId) -> bool {
        self.visibility[i].binary_search(&view).is_ok()
    }

    pub fn spatial_index(&self) -> Result<SpatialIndex<T>> {
        SpatialIndex::build(&self.positions)
    }
}

/// Per-view depth image; values `<= 0` mark invalid pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub view_id: ViewId,
    pub width: u32,
    pub height: u32,
    depths: Vec<f32>,
}

impl DepthMap {
    pub fn new(view_id: ViewId, width: u32, height: u32, depths: Vec<f32>) -> Result<Self> {
        if depths.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "depth map {view_id}: expected {} values, got {}",
                width as usize * height as usize,
                depths.len()
            )));
        }
        Ok(Self {
            view_id,
            width,
            height,
            depths,
        })
    }

    /// All-invalid map.
    pub fn empty(view_id: ViewId, width: u32, height: u32) -> Self {
        Self {
            view_id,
            width,
            height,
            depths: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn depths(&self) -> &[f32] {
        &self.depths
    }

    #[inline]
    pub fn get(&self, col: u32, row: u32) -> f32 {
        self.depths[row as usize * self.width as usize + col as usize]
    }

    #[inline]
    pub fn set(&mut self, col: u32, row: u32, depth: f32) {
        self.depths[row as usize * self.width as usize + col as usize] = depth;
    }

    pub fn valid_count(&self) -> usize {
        self.depths.iter().filter(|&&d| d > 0.0 && d.is_finite()).count()
    }
}
