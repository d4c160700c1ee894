use std::collections::HashMap;

use rayon::prelude::*;

use super::{DepthMap, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{CameraView, Pixel, Vec3, ViewId};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionConfig<T> {
    /// Only every `pixel_stride`-th row and column is unprojected.
    pub pixel_stride: u32,
    /// Points from different views closer than this are merged.
    pub merge_radius: T,
    /// Merged points observed by fewer views are dropped.
    pub min_views: usize,
}

impl<T: Scalar> Default for FusionConfig<T> {
    fn default() -> Self {
        Self {
            pixel_stride: 4,
            merge_radius: T::of(0.05),
            min_views: 1,
        }
    }
}

struct Cluster<T> {
    seed: Vec3<T>,
    sum: Vec3<T>,
    count: usize,
    views: Vec<ViewId>,
}

type Cell = (i64, i64, i64);

/// Fuses per-view depth maps into a single cloud for one traversal.
///
/// Valid depth pixels (on the `pixel_stride` lattice) are unprojected and
/// processed in `(view_id, row, column)` order. Each point joins the nearest
/// existing cluster whose seed lies strictly within `merge_radius` and which
/// holds no point from the same view; otherwise it seeds a new cluster.
/// Clusters are bucketed in a voxel hash with cell size `merge_radius`.
pub fn fuse_depth_maps<T: Scalar>(
    views: &[CameraView<T>],
    depths: &[DepthMap],
    cfg: &FusionConfig<T>,
) -> Result<PointCloud<T>> {
    if views.is_empty() {
        return Err(Error::invalid("no views to fuse"));
    }
    if views.len() != depths.len() {
        return Err(Error::invalid(format!(
            "{} views but {} depth maps",
            views.len(),
            depths.len()
        )));
    }
    if cfg.pixel_stride == 0 {
        return Err(Error::invalid("pixel stride must be at least 1"));
    }
    if !(cfg.merge_radius >= T::zero()) {
        return Err(Error::invalid("merge radius must be nonnegative"));
    }
    let traversal = views[0].traversal_id();
    if let Some(v) = views.iter().find(|v| v.traversal_id() != traversal) {
        return Err(Error::invalid(format!(
            "view {} belongs to traversal {}, expected {traversal}",
            v.view_id(),
            v.traversal_id()
        )));
    }

    let mut pairs = Vec::with_capacity(views.len());
    for view in views {
        let mut found = depths.iter().filter(|d| d.view_id == view.view_id());
        let dm = found
            .next()
            .ok_or_else(|| Error::invalid(format!("no depth map for view {}", view.view_id())))?;
        if found.next().is_some() {
            return Err(Error::invalid(format!(
                "duplicate depth map for view {}",
                view.view_id()
            )));
        }
        if dm.width != view.width() || dm.height != view.height() {
            return Err(Error::invalid(format!(
                "depth map {} is {}x{}, view is {}x{}",
                dm.view_id,
                dm.width,
                dm.height,
                view.width(),
                view.height()
            )));
        }
        pairs.push((view, dm));
    }
    pairs.sort_by_key(|(v, _)| v.view_id());
    if pairs.windows(2).any(|w| w[0].0.view_id() == w[1].0.view_id()) {
        return Err(Error::invalid("duplicate view id"));
    }

    let stride = cfg.pixel_stride as usize;
    let per_view: Vec<Vec<Vec3<T>>> = pairs
        .par_iter()
        .map(|(view, dm)| {
            let mut out = Vec::new();
            for row in (0..dm.height).step_by(stride) {
                for col in (0..dm.width).step_by(stride) {
                    let d = dm.get(col, row);
                    if d > 0.0 && d.is_finite() {
                        let px = Pixel::new(T::of(col as f64), T::of(row as f64));
                        if let Ok(p) = view.unproject(&px, T::of(d as f64)) {
                            out.push(p);
                        }
                    }
                }
            }
            out
        })
        .collect();

    let radius = cfg.merge_radius;
    let merging = radius > T::zero();
    let r2 = radius * radius;
    let cell_of = |p: &Vec3<T>| -> Cell {
        let f = |c: T| (c / radius).floor().to_i64().unwrap_or(0);
        (f(p.x), f(p.y), f(p.z))
    };

    let mut clusters: Vec<Cluster<T>> = Vec::new();
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    for ((view, _), points) in pairs.iter().zip(&per_view) {
        let vid = view.view_id();
        for &p in points {
            let mut best: Option<(T, usize)> = None;
            if merging {
                let (cx, cy, cz) = cell_of(&p);
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        for dz in -1..=1 {
                            let Some(ids) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                                continue;
                            };
                            for &id in ids {
                                let c = &clusters[id];
                                let d2 = c.seed.distance_squared(&p);
                                if d2 < r2
                                    && c.views.binary_search(&vid).is_err()
                                    && best.is_none_or(|(bd, bi)| d2 < bd || (d2 == bd && id < bi))
                                {
                                    best = Some((d2, id));
                                }
                            }
                        }
                    }
                }
            }
            match best {
                Some((_, id)) => {
                    let c = &mut clusters[id];
                    c.sum += p;
                    c.count += 1;
                    if let Err(pos) = c.views.binary_search(&vid) {
                        c.views.insert(pos, vid);
                    }
                }
                None => {
                    if merging {
                        grid.entry(cell_of(&p)).or_default().push(clusters.len());
                    }
                    clusters.push(Cluster {
                        seed: p,
                        sum: p,
                        count: 1,
                        views: vec![vid],
                    });
                }
            }
        }
    }

    let mut positions = Vec::new();
    let mut visibility = Vec::new();
    for c in clusters {
        if c.views.len() >= cfg.min_views {
            positions.push(c.sum * (T::one() / T::of(c.count as f64)));
            visibility.push(c.views);
        }
    }
    PointCloud::new(traversal, positions, visibility)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Intrinsics, Quaternion};

    fn view(id: u32, t: Vec3<f64>) -> CameraView<f64> {
        CameraView::new(
            ViewId(id),
            "a",
            "",
            Quaternion::identity(),
            t,
            Intrinsics {
                fx: 50.0,
                fy: 50.0,
                cx: 8.0,
                cy: 6.0,
                width: 16,
                height: 12,
            },
        )
        .unwrap()
    }

    #[test]
    fn single_pixel() {
        let v = view(3, Vec3::zero());
        let mut dm = DepthMap::empty(ViewId(3), 16, 12);
        dm.set(8, 6, 2.0);
        let every_pixel = FusionConfig {
            pixel_stride: 1,
            ..FusionConfig::default()
        };
        let cloud = fuse_depth_maps(&[v], &[dm], &every_pixel).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.position(0), Vec3::new(0.0, 0.0, 2.0));
        assert_eq!(cloud.visible_in(0), &[ViewId(3)]);
    }

    #[test]
    fn identical_views_merge() {
        let mut dm = DepthMap::new(ViewId(1), 16, 12, vec![3.0; 16 * 12]).unwrap();
        let v1 = view(1, Vec3::zero());
        let v2 = view(2, Vec3::zero());
        let dm2 = DepthMap::new(ViewId(2), 16, 12, dm.depths().to_vec()).unwrap();
        dm.set(0, 0, 0.0);
        let cloud = fuse_depth_maps(&[v2, v1], &[dm2, dm], &FusionConfig::default()).unwrap();
        // 4x3 lattice, one pixel missing from view 1; clusters keep creation order
        assert_eq!(cloud.len(), 12);
        assert_eq!(cloud.visible_in(11), &[ViewId(2)]);
        for i in 0..11 {
            assert_eq!(cloud.visible_in(i), &[ViewId(1), ViewId(2)]);
        }
        let two_views = FusionConfig {
            min_views: 2,
            ..FusionConfig::default()
        };
        assert_eq!(
            fuse_depth_maps(
                &[view(1, Vec3::zero()), view(2, Vec3::zero())],
                &[
                    DepthMap::new(ViewId(1), 16, 12, vec![3.0; 192]).unwrap(),
                    DepthMap::new(ViewId(2), 16, 12, vec![3.0; 192]).unwrap()
                ],
                &two_views
            )
            .unwrap()
            .len(),
            12
        );
    }

    #[test]
    fn zero_radius_keeps_every_pixel() {
        let views = [view(1, Vec3::zero()), view(2, Vec3::zero())];
        let dms = [
            DepthMap::new(ViewId(1), 16, 12, vec![3.0; 192]).unwrap(),
            DepthMap::new(ViewId(2), 16, 12, vec![3.0; 192]).unwrap(),
        ];
        let cfg = FusionConfig {
            pixel_stride: 1,
            merge_radius: 0.0,
            min_views: 1,
        };
        assert_eq!(fuse_depth_maps(&views, &dms, &cfg).unwrap().len(), 2 * 192);
    }

    #[test]
    fn same_view_points_never_merge() {
        // dense lattice at 1 m: neighbors are 2 cm apart, well inside the radius
        let v = view(1, Vec3::zero());
        let dm = DepthMap::new(ViewId(1), 16, 12, vec![1.0; 192]).unwrap();
        let cfg = FusionConfig {
            pixel_stride: 1,
            ..FusionConfig::default()
        };
        assert_eq!(fuse_depth_maps(&[v], &[dm], &cfg).unwrap().len(), 192);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let v = view(1, Vec3::zero());
        let dm = DepthMap::empty(ViewId(1), 15, 12);
        assert!(matches!(
            fuse_depth_maps(std::slice::from_ref(&v), &[dm], &FusionConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
        let dm = DepthMap::empty(ViewId(9), 16, 12);
        assert!(fuse_depth_maps(&[v], &[dm], &FusionConfig::default()).is_err());
        assert!(fuse_depth_maps::<f64>(&[], &[], &FusionConfig::default()).is_err());
    }
}
