use std::collections::BTreeSet;

use super::feature_map::LabelMap;
use crate::dataset::CorrespondenceSample;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cityscapes class names in training-id order.
pub const CITYSCAPES_CLASSES: [&str; 19] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
];

/// Classes of movable objects: person, rider, car, truck, bus, train,
/// motorcycle, bicycle.
pub fn nonstationary_classes() -> BTreeSet<u32> {
    (11..=18).collect()
}

/// Weights of the correspondence term in training.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrLossConfig<T> {
    pub margin: T,
    pub lambda: T,
    pub warmup_iters: u64,
    pub nonstationary_classes: BTreeSet<u32>,
}

impl<T: Scalar> CorrLossConfig<T> {
    pub fn new(margin: T, lambda: T, warmup_iters: u64) -> Result<Self> {
        if !(margin >= -T::one() && margin <= T::one()) {
            return Err(Error::invalid(format!("margin {margin} outside [-1, 1]")));
        }
        if !(lambda >= T::zero()) {
            return Err(Error::invalid(format!("lambda {lambda} is negative")));
        }
        Ok(Self {
            margin,
            lambda,
            warmup_iters,
            nonstationary_classes: nonstationary_classes(),
        })
    }

    /// Cross-entropy on the final layer.
    pub fn cross_entropy() -> Self {
        Self::new(T::of(0.8), T::one(), 500).expect("valid defaults")
    }

    /// Hinge on the final layer.
    pub fn hinge_final() -> Self {
        Self::cross_entropy()
    }

    /// Hinge on the second-to-last feature layer.
    pub fn hinge_intermediate() -> Self {
        Self::new(T::of(0.8), T::of(0.1), 500).expect("valid defaults")
    }
}

impl<T: Scalar> Default for CorrLossConfig<T> {
    fn default() -> Self {
        Self::cross_entropy()
    }
}

/// `(l_sup + λ l_corr) / (1 + λ)`
pub fn total_loss<T: Scalar>(l_sup: T, l_corr: T, lambda: T) -> T {
    (l_sup + lambda * l_corr) / (T::one() + lambda)
}

/// Correspondence weight at a training iteration: zero during warm-up.
pub fn warmup_gate<T: Scalar>(iteration: u64, cfg: &CorrLossConfig<T>) -> T {
    if iteration < cfg.warmup_iters {
        T::zero()
    } else {
        cfg.lambda
    }
}

/// Drops correspondences whose reference pixel is predicted as a forbidden
/// class. Order is preserved.
pub fn filter_nonstationary(
    sample: &CorrespondenceSample,
    ref_pred: &LabelMap,
    forbidden: &BTreeSet<u32>,
) -> CorrespondenceSample {
    sample.filtered(|_, xr, _| !forbidden.contains(&ref_pred.at(xr)))
}
