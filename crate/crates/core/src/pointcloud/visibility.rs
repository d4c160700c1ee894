use std::collections::HashMap;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{CameraView, ViewId};
use crate::scalar::Scalar;

pub const DEFAULT_REL_DEPTH_TOL: f64 = 0.02;

/// Z-buffer visibility of `cloud` in `view`.
///
/// Points are bucketed by the integer pixel nearest their projection; a point
/// is visible iff its depth is within `(1 + rel_depth_tol)` of the smallest
/// depth in its bucket. Returned indices are ascending.
pub fn compute_visibility<T: Scalar>(
    cloud: &PointCloud<T>,
    view: &CameraView<T>,
    rel_depth_tol: T,
) -> Result<Vec<usize>> {
    if !(rel_depth_tol > T::zero()) {
        return Err(Error::invalid("relative depth tolerance must be positive"));
    }
    let projected: Vec<_> = cloud
        .positions()
        .iter()
        .map(|p| view.project(p).map(|pr| (pr.pixel.nearest_cell(), pr.depth)))
        .collect();
    let mut zbuf: HashMap<(i64, i64), T> = HashMap::new();
    for &(cell, depth) in projected.iter().flatten() {
        zbuf.entry(cell).and_modify(|d| *d = d.min(depth)).or_insert(depth);
    }
    let limit = T::one() + rel_depth_tol;
    Ok(projected
        .iter()
        .enumerate()
        .filter_map(|(i, pr)| {
            let (cell, depth) = (*pr)?;
            (depth <= zbuf[&cell] * limit).then_some(i)
        })
        .collect())
}

/// Computes visibility in every view of the cloud's traversal and returns a
/// cloud holding only the points seen by at least one view, with their
/// visibility sets. Existing visibility information is replaced.
pub fn annotate_visibility<T: Scalar>(
    cloud: &PointCloud<T>,
    views: &[CameraView<T>],
    rel_depth_tol: T,
) -> Result<PointCloud<T>> {
    let mut sets: Vec<Vec<ViewId>> = vec![Vec::new(); cloud.len()];
    let mut own: Vec<&CameraView<T>> = views
        .iter()
        .filter(|v| v.traversal_id() == cloud.traversal_id())
        .collect();
    own.sort_by_key(|v| v.view_id());
    for view in own {
        for i in compute_visibility(cloud, view, rel_depth_tol)? {
            sets[i].push(view.view_id());
        }
    }
    let (positions, visibility): (Vec<_>, Vec<_>) = cloud
        .positions()
        .iter()
        .zip(sets)
        .filter(|(_, s)| !s.is_empty())
        .map(|(p, s)| (*p, s))
        .unzip();
    PointCloud::new(cloud.traversal_id(), positions, visibility)
}
