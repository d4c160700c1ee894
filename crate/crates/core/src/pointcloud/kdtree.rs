use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Scalar;

const LEAF_SIZE: usize = 8;

/// Exact Euclidean nearest-neighbor index over a fixed point set.
///
/// A balanced kd-tree stored implicitly: every range `[lo, hi)` of `order`
/// has its splitting point at `(lo + hi) / 2`, with the split axis in
/// `axes`. Ties between equidistant points resolve to the smallest index.
#[derive(Clone, Debug)]
pub struct SpatialIndex<T> {
    points: Vec<Vec3<T>>,
    order: Vec<u32>,
    axes: Vec<u8>,
}

impl<T: Scalar> SpatialIndex<T> {
    pub fn build(points: &[Vec3<T>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("cannot index an empty point set"));
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::invalid("too many points for the spatial index"));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("point {i} is not finite")));
        }
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            axes: vec![0; points.len()],
        };
        index.build_range(0, points.len());
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    fn build_range(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let axis = self.widest_axis(lo, hi);
        let mid = (lo + hi) / 2;
        let pts = &self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            let ca = pts[a as usize].axis(axis);
            let cb = pts[b as usize].axis(axis);
            ca.partial_cmp(&cb).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        });
        self.axes[mid] = axis as u8;
        self.build_range(lo, mid);
        self.build_range(mid + 1, hi);
    }

    fn widest_axis(&self, lo: usize, hi: usize) -> usize {
        let mut min = [T::infinity(); 3];
        let mut max = [T::neg_infinity(); 3];
        for &i in &self.order[lo..hi] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                min[a] = min[a].min(p.axis(a));
                max[a] = max[a].max(p.axis(a));
            }
        }
        let spread = |a: usize| max[a] - min[a];
        let mut best = 0;
        for a in 1..3 {
            if spread(a) > spread(best) {
                best = a;
            }
        }
        best
    }

    /// Nearest stored point to `query`: `(index, distance)`.
    pub fn nearest(&self, query: &Vec3<T>) -> (usize, T) {
        let mut best = (T::infinity(), u32::MAX);
        self.search(query, 0, self.points.len(), &mut best);
        (best.1 as usize, best.0.sqrt())
    }

    #[inline]
    fn consider(&self, query: &Vec3<T>, i: u32, best: &mut (T, u32)) {
        let d2 = self.points[i as usize].distance_squared(query);
        if d2 < best.0 || (d2 == best.0 && i < best.1) {
            *best = (d2, i);
        }
    }

    fn search(&self, query: &Vec3<T>, lo: usize, hi: usize, best: &mut (T, u32)) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                self.consider(query, i, best);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let pivot = self.order[mid];
        self.consider(query, pivot, best);
        let diff = query.axis(axis) - self.points[pivot as usize].axis(axis);
        let (near, far) = if diff < T::zero() {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(query, near.0, near.1, best);
        // `<=` keeps equidistant candidates reachable for the index tie-break.
        if diff * diff <= best.0 {
            self.search(query, far.0, far.1, best);
        }
    }
}
