use super::feature_map::FeatureMap;
use super::EPSILON_NORM;
use crate::dataset::CorrespondenceSample;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct HingeOutput<T> {
    pub loss: T,
    pub grad_ref: FeatureMap<T>,
    pub grad_tgt: FeatureMap<T>,
}

/// Angle in degrees at which the hinge becomes active: `acos(m)`.
pub fn margin_angle_degrees<T: Scalar>(margin: T) -> T {
    margin.acos().to_degrees()
}

/// Cosine hinge loss `(1/N) Σ max(0, m - cos(d_ref(x_ref_i), d_tgt(x_tgt_i)))`
/// with its gradient w.r.t. both feature maps.
///
/// A pair whose feature vectors have norm below `1e-12` contributes `m` and no
/// gradient. At exactly `cos = m` the hinge is inactive.
pub fn hinge_corr_loss<T: Scalar>(
    ref_map: &FeatureMap<T>,
    tgt_map: &FeatureMap<T>,
    sample: &CorrespondenceSample,
    margin: T,
) -> Result<HingeOutput<T>> {
    if ref_map.channels() != tgt_map.channels() {
        return Err(Error::invalid(format!(
            "feature depth mismatch: {} vs {}",
            ref_map.channels(),
            tgt_map.channels()
        )));
    }
    if sample.is_empty() {
        return Err(Error::invalid("hinge loss needs at least one correspondence"));
    }
    let inv_n = T::one() / T::of(sample.len() as f64);
    let eps = T::of(EPSILON_NORM);
    let mut grad_ref = ref_map.zeros_like();
    let mut grad_tgt = tgt_map.zeros_like();
    let mut total = T::zero();
    for (xr, xt) in sample.pairs() {
        let (cr, ct) = (ref_map.cell_at(xr), tgt_map.cell_at(xt));
        let (a, b) = (ref_map.cell(cr), tgt_map.cell(ct));
        let na = a.iter().map(|&x| x * x).sum::<T>().sqrt();
        let nb = b.iter().map(|&x| x * x).sum::<T>().sqrt();
        if na < eps || nb < eps {
            total += margin;
            continue;
        }
        let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
        let inv_ab = T::one() / (na * nb);
        let cos = dot * inv_ab;
        let term = margin - cos;
        if term <= T::zero() {
            continue;
        }
        total += term;
        // d cos / d a = b / (|a||b|) - cos a / |a|^2, symmetric in b
        let (ka, kb) = (cos / (na * na), cos / (nb * nb));
        for (g, (&x, &y)) in grad_ref.cell_mut(cr).iter_mut().zip(a.iter().zip(b)) {
            *g -= inv_n * (y * inv_ab - ka * x);
        }
        for (g, (&x, &y)) in grad_tgt.cell_mut(ct).iter_mut().zip(a.iter().zip(b)) {
            *g -= inv_n * (x * inv_ab - kb * y);
        }
    }
    Ok(HingeOutput {
        loss: total * inv_n,
        grad_ref,
        grad_tgt,
    })
}
