use std::collections::{BTreeMap, HashMap};

use super::scene::SyntheticScene;
use crate::dataset::CorrespondenceSample;
use crate::error::{Error, Result};
use crate::geometry::{Pixel, ViewId};

pub const DEFAULT_PIXEL_TOL: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub emitted: usize,
    pub correct: usize,
    /// `correct / emitted`; 1.0 when nothing was emitted.
    pub precision: f64,
    /// False when `emitted == 0`.
    pub precision_defined: bool,
    pub ground_truth_total: usize,
    pub ground_truth_matched: usize,
    pub recall: f64,
}

/// Ground-truth pairs of one camera pair, bucketed by reference cell.
struct Bucket<'a> {
    ref_px: &'a [Pixel<f64>],
    tgt_px: &'a [Pixel<f64>],
    grid: HashMap<(i64, i64), Vec<usize>>,
    cell: f64,
}

impl<'a> Bucket<'a> {
    fn new(s: &'a CorrespondenceSample, cell: f64) -> Self {
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in s.x_ref().iter().enumerate() {
            grid.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self {
            ref_px: s.x_ref(),
            tgt_px: s.x_tgt(),
            grid,
            cell,
        }
    }

    fn key(p: &Pixel<f64>, cell: f64) -> (i64, i64) {
        ((p.u / cell).floor() as i64, (p.v / cell).floor() as i64)
    }

    /// Closest ground-truth entry (by summed endpoint distance) with both
    /// endpoints within `tol`.
    fn best(&self, xr: &Pixel<f64>, xt: &Pixel<f64>, tol: f64) -> Option<usize> {
        let (cu, cv) = Self::key(xr, self.cell);
        let mut best: Option<(f64, usize)> = None;
        for du in -1..=1 {
            for dv in -1..=1 {
                for &i in self.grid.get(&(cu + du, cv + dv)).into_iter().flatten() {
                    let (dr, dt) = (self.ref_px[i].distance(xr), self.tgt_px[i].distance(xt));
                    if dr <= tol && dt <= tol && best.is_none_or(|(d, _)| dr + dt < d) {
                        best = Some((dr + dt, i));
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Scores generated correspondences against ground-truth samples.
///
/// A generated pair is correct iff some ground-truth pair of the same camera
/// pair has both endpoints within `pixel_tol`; the closest such pair counts
/// as matched. Recall is over the ground truth of camera pairs that appear
/// in `generated`.
pub fn evaluate_against(
    generated: &[CorrespondenceSample],
    ground_truth: &[CorrespondenceSample],
    pixel_tol: f64,
) -> Result<EvalReport> {
    if !(pixel_tol > 0.0) {
        return Err(Error::invalid("pixel tolerance must be positive"));
    }
    let gt: BTreeMap<(ViewId, ViewId), &CorrespondenceSample> = ground_truth
        .iter()
        .map(|s| ((s.ref_view_id(), s.target_view_id()), s))
        .collect();
    let mut buckets: BTreeMap<(ViewId, ViewId), (Bucket, Vec<bool>)> = BTreeMap::new();
    let (mut emitted, mut correct) = (0, 0);
    for s in generated {
        let key = (s.ref_view_id(), s.target_view_id());
        emitted += s.len();
        let Some(truth) = gt.get(&key) else { continue };
        let (bucket, matched) = buckets
            .entry(key)
            .or_insert_with(|| (Bucket::new(truth, pixel_tol), vec![false; truth.len()]));
        for (xr, xt) in s.pairs() {
            if let Some(i) = bucket.best(xr, xt, pixel_tol) {
                correct += 1;
                matched[i] = true;
            }
        }
    }
    let pairs: std::collections::BTreeSet<_> = generated
        .iter()
        .map(|s| (s.ref_view_id(), s.target_view_id()))
        .collect();
    let ground_truth_total = pairs.iter().filter_map(|k| gt.get(k)).map(|s| s.len()).sum();
    let ground_truth_matched = buckets.values().map(|(_, m)| m.iter().filter(|&&b| b).count()).sum();
    Ok(EvalReport {
        emitted,
        correct,
        precision: if emitted == 0 {
            1.0
        } else {
            correct as f64 / emitted as f64
        },
        precision_defined: emitted > 0,
        ground_truth_total,
        ground_truth_matched,
        recall: if ground_truth_total == 0 {
            0.0
        } else {
            ground_truth_matched as f64 / ground_truth_total as f64
        },
    })
}

/// [`evaluate_against`] with the scene's ground truth for every traversal
/// pair occurring in `generated`.
pub fn evaluate_correspondences(
    generated: &[CorrespondenceSample],
    scene: &SyntheticScene,
    pixel_tol: f64,
) -> Result<EvalReport> {
    let traversal_of: HashMap<ViewId, usize> = scene
        .traversals
        .iter()
        .enumerate()
        .flat_map(|(k, t)| t.views.iter().map(move |v| (v.view_id(), k)))
        .collect();
    let mut combos = std::collections::BTreeSet::new();
    for s in generated {
        match (
            traversal_of.get(&s.ref_view_id()),
            traversal_of.get(&s.target_view_id()),
        ) {
            (Some(&r), Some(&t)) => {
                combos.insert((r, t));
            }
            _ => {
                return Err(Error::invalid(format!(
                    "sample {} refers to views outside the scene",
                    s.file_name()
                )))
            }
        }
    }
    let mut truth = Vec::new();
    for (r, t) in combos {
        truth.extend(scene.ground_truth(r, t)?);
    }
    evaluate_against(generated, &truth, pixel_tol)
}
