//! Sliding-window inference: patch layout, center-weighted interpolation
//! maps and weighted-mean fusion of overlapping patch scores.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_PATCH_SIZE: usize = 713;
pub const DEFAULT_PATCH_STRIDE: usize = 476;
pub const DEFAULT_CENTER_SIZE: usize = 236;
pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-6;

/// Top-left corners of the patches covering an image, sorted by `(y, x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilePlan {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub stride: usize,
    pub origins: Vec<(usize, usize)>,
}

/// Origins `0, stride, 2 stride, ..` that fit, plus `extent - patch` if the
/// last one stops short of the far edge.
pub fn axis_origins(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..).map(|k| k * stride).take_while(|&o| o + patch <= extent).collect();
    if out.last().is_some_and(|&o| o < extent - patch) {
        out.push(extent - patch);
    }
    out
}

/// Images smaller than the patch must be padded by the caller (reflection
/// padding works well).
pub fn plan_tiles(width: usize, height: usize, patch_size: usize, stride: usize) -> Result<TilePlan> {
    if patch_size == 0 || stride == 0 || stride > patch_size {
        return Err(Error::invalid(format!(
            "need 0 < stride <= patch size, got stride {stride}, patch {patch_size}"
        )));
    }
    if width < patch_size || height < patch_size {
        return Err(Error::invalid(format!(
            "image {width}x{height} is smaller than the {patch_size}px patch; pad it first"
        )));
    }
    let xs = axis_origins(width, patch_size, stride);
    let ys = axis_origins(height, patch_size, stride);
    let origins = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    Ok(TilePlan {
        width,
        height,
        patch_size,
        stride,
        origins,
    })
}

/// Per-patch interpolation weights: 1 in the center region, falling linearly
/// toward the patch border, never below `w_floor`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap<T> {
    pub patch_size: usize,
    pub center_size: usize,
    pub w_floor: T,
    weights: Vec<T>,
}

impl<T: Scalar> WeightMap<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> T {
        self.weights[y * self.patch_size + x]
    }
}

/// Separable ramp weights. Along each axis, pixel `i` sits `min(i, P-1-i)`
/// pixels from the border; the ramp reaches 1 after `(P - C) / 2` pixels.
pub fn make_weight_map<T: Scalar>(patch_size: usize, center_size: usize, w_floor: T) -> Result<WeightMap<T>> {
    if center_size == 0 || center_size > patch_size {
        return Err(Error::invalid(format!(
            "need 0 < center size <= patch size, got {center_size} and {patch_size}"
        )));
    }
    if !(w_floor > T::zero() && w_floor <= T::one()) {
        return Err(Error::invalid("weight floor must lie in (0, 1]"));
    }
    let half_ramp = T::of((patch_size - center_size) as f64 / 2.0);
    let axis: Vec<T> = (0..patch_size)
        .map(|i| {
            if half_ramp == T::zero() {
                return T::one();
            }
            let edge = T::of(i.min(patch_size - 1 - i) as f64);
            (edge / half_ramp).min(T::one())
        })
        .collect();
    let weights = axis
        .iter()
        .flat_map(|&wy| axis.iter().map(move |&wx| (wx * wy).max(w_floor)))
        .collect();
    Ok(WeightMap {
        patch_size,
        center_size,
        w_floor,
        weights,
    })
}

/// `height x width x channels` scores, channels innermost.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreGrid<T> {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<T>,
}

impl<T: Scalar> ScoreGrid<T> {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<T>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("score grid needs at least one channel"));
        }
        if values.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "expected {} scores, got {}",
                width * height * channels,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn at(&self, x: usize, y: usize) -> &[T] {
        let k = (y * self.width + x) * self.channels;
        &self.values[k..k + self.channels]
    }
}

/// Scores of the patch whose top-left corner is `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch<T> {
    pub x: usize,
    pub y: usize,
    pub scores: ScoreGrid<T>,
}

/// Weighted mean of all patch scores covering each pixel.
///
/// Patches are accumulated in plan order whatever order they are passed in,
/// and each result is clamped to the range of its contributors, so pixels
/// whose contributors agree reproduce that value exactly.
pub fn fuse_patch_scores<T: Scalar>(
    plan: &TilePlan,
    weights: &WeightMap<T>,
    patches: &[Patch<T>],
) -> Result<ScoreGrid<T>> {
    let p = plan.patch_size;
    if weights.patch_size != p {
        return Err(Error::invalid("weight map size differs from the plan's patch size"));
    }
    if patches.len() != plan.origins.len() {
        return Err(Error::invalid(format!(
            "plan has {} patches, got {}",
            plan.origins.len(),
            patches.len()
        )));
    }
    let channels = patches.first().map_or(1, |pt| pt.scores.channels());
    let mut by_origin: HashMap<(usize, usize), &Patch<T>> = HashMap::new();
    for pt in patches {
        if pt.scores.width() != p || pt.scores.height() != p || pt.scores.channels() != channels {
            return Err(Error::invalid(format!(
                "patch at ({}, {}) has the wrong shape",
                pt.x, pt.y
            )));
        }
        if by_origin.insert((pt.x, pt.y), pt).is_some() {
            return Err(Error::invalid(format!("duplicate patch at ({}, {})", pt.x, pt.y)));
        }
    }
    let ordered = plan
        .origins
        .iter()
        .map(|o| {
            by_origin
                .get(o)
                .copied()
                .ok_or_else(|| Error::invalid(format!("no scores for planned patch at {o:?}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let row_len = plan.width * channels;
    let mut out = vec![T::zero(); plan.height * row_len];
    out.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| {
        let mut num = vec![T::zero(); row_len];
        let mut den = vec![T::zero(); plan.width];
        let mut lo = vec![T::infinity(); row_len];
        let mut hi = vec![T::neg_infinity(); row_len];
        for pt in ordered.iter().filter(|pt| y >= pt.y && y < pt.y + p) {
            let py = y - pt.y;
            for px in 0..p {
                let x = pt.x + px;
                let w = weights.at(px, py);
                den[x] += w;
                for (c, &s) in pt.scores.at(px, py).iter().enumerate() {
                    let k = x * channels + c;
                    num[k] += w * s;
                    lo[k] = lo[k].min(s);
                    hi[k] = hi[k].max(s);
                }
            }
        }
        for (k, v) in row.iter_mut().enumerate() {
            *v = (num[k] / den[k / channels]).max(lo[k]).min(hi[k]);
        }
    });
    ScoreGrid::new(plan.width, plan.height, channels, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_patch_plan() {
        let plan = plan_tiles(713, 713, 713, 476).unwrap();
        assert_eq!(plan.origins, vec![(0, 0)]);
    }

    #[test]
    fn clamped_last_origin() {
        assert_eq!(axis_origins(1024, 713, 476), vec![0, 311]);
        assert_eq!(axis_origins(1904, 713, 476), vec![0, 476, 952, 1191]);
        assert_eq!(axis_origins(1189, 713, 476), vec![0, 476]);
        let plan = plan_tiles(1024, 800, 713, 476).unwrap();
        assert_eq!(plan.origins, vec![(0, 0), (311, 0), (0, 87), (311, 87)]);
    }

    #[test]
    fn plan_errors() {
        assert!(plan_tiles(700, 800, 713, 476).is_err());
        assert!(plan_tiles(800, 800, 713, 0).is_err());
        assert!(plan_tiles(800, 800, 713, 714).is_err());
    }

    #[test]
    fn weight_map_shape() {
        let wm = make_weight_map(713, 236, 1e-6).unwrap();
        assert_eq!(wm.at(356, 356), 1.0);
        assert_eq!(wm.at(0, 0), 1e-6);
        assert_eq!(wm.at(712, 356), 1e-6);
        // 237 center columns have weight at least 1 - 1/477
        let near_one = (0..713).filter(|&x| wm.at(x, 356) >= 1.0 - 1.0 / 477.0 - 1e-12).count();
        assert_eq!(near_one, 237);
        let ones = (0..713).filter(|&x| wm.at(x, 356) == 1.0).count();
        assert_eq!(ones, 235);
    }

    #[test]
    fn weight_map_boundary_and_symmetry() {
        // P = 11, C = 5: ramp length 3, center region starts at pixel 3
        let wm = make_weight_map(11, 5, 1e-6f64).unwrap();
        assert_eq!(wm.at(3, 5), 1.0);
        assert!((wm.at(2, 5) - 2.0 / 3.0).abs() < 1e-15);
        for y in 0..11 {
            for x in 0..11 {
                assert_eq!(wm.at(x, y), wm.at(10 - x, y));
                assert_eq!(wm.at(x, y), wm.at(x, 10 - y));
            }
        }
        assert!(make_weight_map(11, 12, 1e-6f64).is_err());
        assert!(make_weight_map(11, 0, 1e-6f64).is_err());
        assert!(make_weight_map(4, 4, 1e-6).unwrap().weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn single_patch_fusion_is_identity() {
        let plan = plan_tiles(5, 5, 5, 3).unwrap();
        let wm = make_weight_map(5, 1, 1e-6).unwrap();
        let vals: Vec<f64> = (0..50).map(|v| (v as f64 * 0.37).sin()).collect();
        let grid = ScoreGrid::new(5, 5, 2, vals).unwrap();
        let fused = fuse_patch_scores(
            &plan,
            &wm,
            &[Patch {
                x: 0,
                y: 0,
                scores: grid.clone(),
            }],
        )
        .unwrap();
        assert_eq!(fused, grid);
    }

    #[test]
    fn agreeing_patches_fuse_exactly() {
        let plan = plan_tiles(8, 5, 5, 3).unwrap();
        assert_eq!(plan.origins, vec![(0, 0), (3, 0)]);
        let wm = make_weight_map(5, 1, 1e-6).unwrap();
        let grid = ScoreGrid::new(5, 5, 1, vec![0.1; 25]).unwrap();
        let patches: Vec<_> = plan
            .origins
            .iter()
            .map(|&(x, y)| Patch {
                x,
                y,
                scores: grid.clone(),
            })
            .collect();
        let fused = fuse_patch_scores(&plan, &wm, &patches).unwrap();
        assert!(fused.values().iter().all(|&v| v == 0.1));
        assert!(fuse_patch_scores(&plan, &wm, &patches[..1]).is_err());
    }
}
