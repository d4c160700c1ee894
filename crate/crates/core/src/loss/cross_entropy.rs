use super::feature_map::{argmax, FeatureMap, LabelMap, IGNORE_LABEL};
use super::EPSILON_LOG;
use crate::dataset::CorrespondenceSample;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Loss value with the gradient w.r.t. the logits it depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct CeOutput<T> {
    pub loss: T,
    pub grad: FeatureMap<T>,
}

/// Writes `softmax(logits)` into `out` and returns `log-sum-exp(logits)`.
fn softmax_into<T: Scalar>(logits: &[T], out: &mut [T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    max + sum.ln()
}

/// Correspondence cross-entropy: the reference argmax class at `x_ref_i` is
/// the target for the softmax of the target logits at `x_tgt_i`.
///
/// The reference branch is treated as constant; the gradient is w.r.t. the
/// target logits only. Log-probabilities are clamped at `ln(1e-12)`.
pub fn ce_corr_loss<T: Scalar>(
    ref_logits: &FeatureMap<T>,
    tgt_logits: &FeatureMap<T>,
    sample: &CorrespondenceSample,
) -> Result<CeOutput<T>> {
    if ref_logits.channels() != tgt_logits.channels() {
        return Err(Error::invalid(format!(
            "class count mismatch: {} vs {}",
            ref_logits.channels(),
            tgt_logits.channels()
        )));
    }
    if sample.is_empty() {
        return Err(Error::invalid("cross-entropy loss needs at least one correspondence"));
    }
    let inv_n = T::one() / T::of(sample.len() as f64);
    let log_floor = T::of(EPSILON_LOG).ln();
    let mut grad = tgt_logits.zeros_like();
    let mut probs = vec![T::zero(); tgt_logits.channels()];
    let mut total = T::zero();
    for (xr, xt) in sample.pairs() {
        let class = argmax(ref_logits.cell(ref_logits.cell_at(xr)));
        let ct = tgt_logits.cell_at(xt);
        let z = tgt_logits.cell(ct);
        let lse = softmax_into(z, &mut probs);
        total -= (z[class] - lse).max(log_floor);
        let g = grad.cell_mut(ct);
        for (k, (gk, &p)) in g.iter_mut().zip(&probs).enumerate() {
            let onehot = if k == class { T::one() } else { T::zero() };
            *gk += inv_n * (p - onehot);
        }
    }
    Ok(CeOutput {
        loss: total * inv_n,
        grad,
    })
}

/// Mean softmax cross-entropy over non-ignored cells. `labels` must have the
/// prediction grid's dimensions. All cells ignored gives loss 0.
pub fn supervised_ce_loss<T: Scalar>(pred: &FeatureMap<T>, labels: &LabelMap) -> Result<CeOutput<T>> {
    if labels.width() != pred.width() || labels.height() != pred.height() {
        return Err(Error::invalid(format!(
            "label grid {}x{} does not match prediction grid {}x{}",
            labels.width(),
            labels.height(),
            pred.width(),
            pred.height()
        )));
    }
    let classes = pred.channels();
    if let Some(bad) = labels
        .labels()
        .iter()
        .find(|&&l| l != IGNORE_LABEL && l as usize >= classes)
    {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let count = labels.labels().iter().filter(|&&l| l != IGNORE_LABEL).count();
    let mut grad = pred.zeros_like();
    if count == 0 {
        return Ok(CeOutput { loss: T::zero(), grad });
    }
    let inv_n = T::one() / T::of(count as f64);
    let mut probs = vec![T::zero(); classes];
    let mut total = T::zero();
    for (cell, &label) in labels.labels().iter().enumerate() {
        if label == IGNORE_LABEL {
            continue;
        }
        let z = pred.cell(cell);
        let lse = softmax_into(z, &mut probs);
        total -= z[label as usize] - lse;
        for (k, (gk, &p)) in grad.cell_mut(cell).iter_mut().zip(&probs).enumerate() {
            let onehot = if k == label as usize { T::one() } else { T::zero() };
            *gk = inv_n * (p - onehot);
        }
    }
    Ok(CeOutput {
        loss: total * inv_n,
        grad,
    })
}
