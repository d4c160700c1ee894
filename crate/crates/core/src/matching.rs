//! Geometric matching between two traversals' point clouds.
//!
//! Points are matched once globally by mutual nearest neighbors, then grouped
//! by reference/target camera pair through the visibility sets. Each camera
//! pair is pruned independently with a threshold proportional to the
//! distance from the reference camera, and surviving matches are projected
//! into both images.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::dataset::{CorrespondenceSample, ImageRef};
use crate::error::{Error, Result};
use crate::geometry::{CameraView, Pixel, ViewId};
use crate::pointcloud::PointCloud;
use crate::scalar::Scalar;

/// A mutual nearest neighbor pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Match<T> {
    pub ref_index: usize,
    pub target_index: usize,
    pub distance: T,
}

/// Mutual nearest neighbors between a reference and a target cloud, sorted
/// by reference index. No reference or target index appears twice.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchSet<T = f64> {
    pub ref_traversal_id: String,
    pub target_traversal_id: String,
    pairs: Vec<Match<T>>,
}

impl<T: Scalar> MatchSet<T> {
    pub fn pairs(&self) -> &[Match<T>] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, m: usize) -> &Match<T> {
        &self.pairs[m]
    }
}

/// Matches whose points are seen from both cameras of a pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPairMatches<T = f64> {
    pub ref_view_id: ViewId,
    pub target_view_id: ViewId,
    pub camera_distance: T,
    /// Ascending indices into the [`MatchSet`].
    pub match_indices: Vec<usize>,
}

/// Thresholds of the matching pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchingParams<T> {
    /// Minimum number of co-visible matches for a camera pair (inclusive).
    pub min_common: usize,
    /// Camera centers must be strictly closer than this, meters.
    pub max_cam_dist: T,
    /// Pruning factor: keep iff `|X1 - X2| < kappa * D`.
    pub kappa: T,
}

impl<T: Scalar> MatchingParams<T> {
    /// Dense MVS clouds with many views per traversal.
    pub fn cmu() -> Self {
        Self {
            min_common: 500,
            max_cam_dist: T::of(0.5),
            kappa: T::of(0.01),
        }
    }

    /// LIDAR clouds with fewer views: wider camera-pair radius.
    pub fn robotcar() -> Self {
        Self {
            max_cam_dist: T::of(2.0),
            ..Self::cmu()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_common == 0 {
            return Err(Error::invalid("min_common must be at least 1"));
        }
        if !(self.max_cam_dist > T::zero()) {
            return Err(Error::invalid("max_cam_dist must be positive"));
        }
        if !(self.kappa > T::zero()) {
            return Err(Error::invalid("kappa must be positive"));
        }
        Ok(())
    }
}

pub fn mutual_nearest_neighbors<T: Scalar>(
    cloud_ref: &PointCloud<T>,
    cloud_tgt: &PointCloud<T>,
) -> Result<MatchSet<T>> {
    if cloud_ref.is_empty() || cloud_tgt.is_empty() {
        return Err(Error::invalid("mutual nearest neighbors needs two nonempty clouds"));
    }
    let (ref_index, tgt_index) = rayon::join(|| cloud_ref.spatial_index(), || cloud_tgt.spatial_index());
    let (ref_index, tgt_index) = (ref_index?, tgt_index?);
    let pairs = cloud_ref
        .positions()
        .par_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let (j, distance) = tgt_index.nearest(p);
            let (back, _) = ref_index.nearest(&cloud_tgt.position(j));
            (back == i).then_some(Match {
                ref_index: i,
                target_index: j,
                distance,
            })
        })
        .collect();
    Ok(MatchSet {
        ref_traversal_id: cloud_ref.traversal_id().to_string(),
        target_traversal_id: cloud_tgt.traversal_id().to_string(),
        pairs,
    })
}

/// Camera pairs (reference traversal view, target traversal view) that share
/// at least `min_common` matches and whose centers are closer than
/// `max_cam_dist`, sorted by `(ref_view_id, target_view_id)`.
pub fn select_camera_pairs<T: Scalar>(
    matches: &MatchSet<T>,
    cloud_ref: &PointCloud<T>,
    cloud_tgt: &PointCloud<T>,
    views: &[CameraView<T>],
    min_common: usize,
    max_cam_dist: T,
) -> Result<Vec<CameraPairMatches<T>>> {
    if min_common == 0 {
        return Err(Error::invalid("min_common must be at least 1"));
    }
    if !(max_cam_dist > T::zero()) {
        return Err(Error::invalid("max_cam_dist must be positive"));
    }
    let centers = |traversal: &str| -> HashMap<ViewId, _> {
        views
            .iter()
            .filter(|v| v.traversal_id() == traversal)
            .map(|v| (v.view_id(), v.camera_center()))
            .collect()
    };
    let ref_centers = centers(cloud_ref.traversal_id());
    let tgt_centers = centers(cloud_tgt.traversal_id());

    let mut distance_cache: HashMap<(ViewId, ViewId), Option<T>> = HashMap::new();
    let mut common: BTreeMap<(ViewId, ViewId), Vec<usize>> = BTreeMap::new();
    for (m, pair) in matches.pairs().iter().enumerate() {
        for r in cloud_ref.visible_in(pair.ref_index) {
            let Some(rc) = ref_centers.get(r) else { continue };
            for t in cloud_tgt.visible_in(pair.target_index) {
                let Some(tc) = tgt_centers.get(t) else { continue };
                let close = *distance_cache.entry((*r, *t)).or_insert_with(|| {
                    let d = rc.distance(tc);
                    (d < max_cam_dist).then_some(d)
                });
                if close.is_some() {
                    common.entry((*r, *t)).or_default().push(m);
                }
            }
        }
    }
    Ok(common
        .into_iter()
        .filter(|(_, idx)| idx.len() >= min_common)
        .map(|((r, t), match_indices)| CameraPairMatches {
            ref_view_id: r,
            target_view_id: t,
            camera_distance: distance_cache[&(r, t)].unwrap_or_default(),
            match_indices,
        })
        .collect())
}

/// Keeps matches with `|X1 - X2| < kappa * |X1 - C_ref|`; order preserved.
pub fn prune_matches<T: Scalar>(
    pair: &CameraPairMatches<T>,
    matches: &MatchSet<T>,
    cloud_ref: &PointCloud<T>,
    cloud_tgt: &PointCloud<T>,
    ref_view: &CameraView<T>,
    kappa: T,
) -> CameraPairMatches<T> {
    let center = ref_view.camera_center();
    let match_indices = pair
        .match_indices
        .iter()
        .copied()
        .filter(|&m| {
            let mt = matches.get(m);
            let x1 = cloud_ref.position(mt.ref_index);
            let x2 = cloud_tgt.position(mt.target_index);
            x1.distance(&x2) < kappa * x1.distance(&center)
        })
        .collect();
    CameraPairMatches {
        match_indices,
        ..pair.clone()
    }
}

/// Projects the pair's matches into both images.
///
/// Matches not projecting into both images are dropped. When several matches
/// land on the same integer reference pixel, the one nearest the reference
/// camera wins (earliest on equal depth).
pub fn project_matches_to_pixels<T: Scalar>(
    pair: &CameraPairMatches<T>,
    matches: &MatchSet<T>,
    cloud_ref: &PointCloud<T>,
    cloud_tgt: &PointCloud<T>,
    ref_view: &CameraView<T>,
    tgt_view: &CameraView<T>,
    condition_tag: &str,
) -> Result<CorrespondenceSample> {
    let mut candidates = Vec::with_capacity(pair.match_indices.len());
    for &m in &pair.match_indices {
        let mt = matches.get(m);
        let (Some(pr), Some(pt)) = (
            ref_view.project(&cloud_ref.position(mt.ref_index)),
            tgt_view.project(&cloud_tgt.position(mt.target_index)),
        ) else {
            continue;
        };
        candidates.push((pr, pt));
    }
    let mut winner: HashMap<(i64, i64), usize> = HashMap::with_capacity(candidates.len());
    for (k, (pr, _)) in candidates.iter().enumerate() {
        winner
            .entry(pr.pixel.nearest_cell())
            .and_modify(|w| {
                if pr.depth < candidates[*w].0.depth {
                    *w = k;
                }
            })
            .or_insert(k);
    }
    let to_f64 = |p: &Pixel<T>| Pixel::new(p.u.to_f64_lossy(), p.v.to_f64_lossy());
    let (x_ref, x_tgt) = candidates
        .iter()
        .enumerate()
        .filter(|(k, (pr, _))| winner[&pr.pixel.nearest_cell()] == *k)
        .map(|(_, (pr, pt))| (to_f64(&pr.pixel), to_f64(&pt.pixel)))
        .unzip();
    CorrespondenceSample::new(
        ImageRef::of_view(ref_view),
        ImageRef::of_view(tgt_view),
        condition_tag,
        x_ref,
        x_tgt,
    )
}

/// Output of [`generate_correspondences`].
#[derive(Clone, Debug)]
pub struct PipelineOutput<T> {
    pub matches: MatchSet<T>,
    pub camera_pairs: Vec<CameraPairMatches<T>>,
    /// One sample per selected camera pair with at least one correspondence,
    /// in `(ref_view_id, target_view_id)` order.
    pub samples: Vec<CorrespondenceSample>,
}

/// Full matching pipeline between two traversals. Camera pairs are processed
/// in parallel on the current rayon pool; output order does not depend on
/// the number of threads.
pub fn generate_correspondences<T: Scalar>(
    cloud_ref: &PointCloud<T>,
    cloud_tgt: &PointCloud<T>,
    views: &[CameraView<T>],
    params: &MatchingParams<T>,
    condition_tag: &str,
) -> Result<PipelineOutput<T>> {
    params.validate()?;
    crate::dataset::validate_condition_tag(condition_tag)?;
    let matches = mutual_nearest_neighbors(cloud_ref, cloud_tgt)?;
    let camera_pairs = select_camera_pairs(
        &matches,
        cloud_ref,
        cloud_tgt,
        views,
        params.min_common,
        params.max_cam_dist,
    )?;
    let by_id: HashMap<ViewId, &CameraView<T>> = views.iter().map(|v| (v.view_id(), v)).collect();
    let samples: Vec<Option<CorrespondenceSample>> = camera_pairs
        .par_iter()
        .map(|pair| -> Result<Option<CorrespondenceSample>> {
            let ref_view = by_id[&pair.ref_view_id];
            let tgt_view = by_id[&pair.target_view_id];
            let pruned = prune_matches(pair, &matches, cloud_ref, cloud_tgt, ref_view, params.kappa);
            let sample = project_matches_to_pixels(
                &pruned,
                &matches,
                cloud_ref,
                cloud_tgt,
                ref_view,
                tgt_view,
                condition_tag,
            )?;
            Ok((!sample.is_empty()).then_some(sample))
        })
        .collect::<Result<_>>()?;
    Ok(PipelineOutput {
        matches,
        camera_pairs,
        samples: samples.into_iter().flatten().collect(),
    })
}
