//! Central finite-difference checks of the analytic loss gradients.
//!
//! The numeric side only ever evaluates loss values, so it stays independent
//! of the gradient code it checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ce_corr_loss, hinge_corr_loss, supervised_ce_loss, FeatureKind, FeatureMap, LabelMap, IGNORE_LABEL};
use crate::dataset::{CorrespondenceSample, ImageRef};
use crate::geometry::{Pixel, ViewId};

pub const FD_STEP: f64 = 1e-6;
pub const MAX_REL_ERROR: f64 = 1e-5;
/// Magnitudes below this are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

pub const FEATURE_DEPTHS: [usize; 3] = [3, 19, 64];
pub const PAIR_COUNTS: [usize; 3] = [1, 7, 50];

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub kernel: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < MAX_REL_ERROR
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Max relative error between `analytic` and central differences of `loss`
/// w.r.t. each entry of `map`.
pub fn compare_with_fd(
    map: &FeatureMap<f64>,
    analytic: &FeatureMap<f64>,
    mut loss: impl FnMut(&FeatureMap<f64>) -> f64,
) -> f64 {
    let mut probe = map.clone();
    let mut worst = 0.0f64;
    for k in 0..map.values().len() {
        let x = map.values()[k];
        probe.values_mut()[k] = x + FD_STEP;
        let up = loss(&probe);
        probe.values_mut()[k] = x - FD_STEP;
        let down = loss(&probe);
        probe.values_mut()[k] = x;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(rel_error(analytic.values()[k], numeric));
    }
    worst
}

fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, f: usize, stride: usize, kind: FeatureKind) -> FeatureMap<f64> {
    let values = (0..w * h * f).map(|_| rng.random_range(-2.0..2.0)).collect();
    FeatureMap::new(w, h, f, stride, kind, values).expect("consistent dimensions")
}

fn random_sample(rng: &mut ChaCha8Rng, n: usize, width: f64, height: f64) -> CorrespondenceSample {
    let mut px = || Pixel::new(rng.random_range(0.0..width), rng.random_range(0.0..height));
    let x_ref: Vec<_> = (0..n).map(|_| px()).collect();
    let x_tgt: Vec<_> = (0..n).map(|_| px()).collect();
    CorrespondenceSample::new(
        ImageRef::unresolved(ViewId(0)),
        ImageRef::unresolved(ViewId(1)),
        "gradcheck",
        x_ref,
        x_tgt,
    )
    .expect("valid sample")
}

struct Instance {
    ref_map: FeatureMap<f64>,
    tgt_map: FeatureMap<f64>,
    sample: CorrespondenceSample,
}

fn random_instance(rng: &mut ChaCha8Rng, f: usize, n: usize, kind: FeatureKind) -> Instance {
    let (w, h) = (rng.random_range(2..=4), rng.random_range(2..=3));
    let stride = rng.random_range(1..=3);
    let ref_map = random_map(rng, w, h, f, stride, kind);
    let tgt_map = random_map(rng, w, h, f, stride, kind);
    let sample = random_sample(rng, n, (w * stride) as f64, (h * stride) as f64);
    Instance {
        ref_map,
        tgt_map,
        sample,
    }
}

/// True when some pair's cosine sits within `gap` of the hinge kink, where
/// finite differences straddle the nondifferentiable point.
fn near_kink(inst: &Instance, margin: f64, gap: f64) -> bool {
    inst.sample.pairs().any(|(xr, xt)| {
        let a = inst.ref_map.cell(inst.ref_map.cell_at(xr));
        let b = inst.tgt_map.cell(inst.tgt_map.cell_at(xt));
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        (dot / (na * nb) - margin).abs() < gap
    })
}

/// Hinge loss with margin drawn from `[-0.5, 0.95]`, `per_combo` instances for
/// each feature depth and pair count.
pub fn check_hinge(per_combo: usize, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut count = 0;
    for &f in &FEATURE_DEPTHS {
        for &n in &PAIR_COUNTS {
            let mut done = 0;
            while done < per_combo {
                let margin = rng.random_range(-0.5..0.95);
                let inst = random_instance(&mut rng, f, n, FeatureKind::Features);
                if near_kink(&inst, margin, 1e-4) {
                    continue;
                }
                let out = hinge_corr_loss(&inst.ref_map, &inst.tgt_map, &inst.sample, margin).expect("valid instance");
                worst = worst.max(compare_with_fd(&inst.ref_map, &out.grad_ref, |m| {
                    hinge_corr_loss(m, &inst.tgt_map, &inst.sample, margin).unwrap().loss
                }));
                worst = worst.max(compare_with_fd(&inst.tgt_map, &out.grad_tgt, |m| {
                    hinge_corr_loss(&inst.ref_map, m, &inst.sample, margin).unwrap().loss
                }));
                done += 1;
                count += 1;
            }
        }
    }
    GradCheckReport {
        kernel: "hinge_corr_loss",
        instances: count,
        max_rel_error: worst,
    }
}

pub fn check_ce_corr(per_combo: usize, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut count = 0;
    for &f in &FEATURE_DEPTHS {
        for &n in &PAIR_COUNTS {
            for _ in 0..per_combo {
                let inst = random_instance(&mut rng, f, n, FeatureKind::Logits);
                let out = ce_corr_loss(&inst.ref_map, &inst.tgt_map, &inst.sample).expect("valid instance");
                worst = worst.max(compare_with_fd(&inst.tgt_map, &out.grad, |m| {
                    ce_corr_loss(&inst.ref_map, m, &inst.sample).unwrap().loss
                }));
                count += 1;
            }
        }
    }
    GradCheckReport {
        kernel: "ce_corr_loss",
        instances: count,
        max_rel_error: worst,
    }
}

pub fn check_supervised_ce(per_combo: usize, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut count = 0;
    for &f in &FEATURE_DEPTHS {
        for _ in 0..per_combo * PAIR_COUNTS.len() {
            let (w, h) = (rng.random_range(1..=4), rng.random_range(1..=3));
            let pred = random_map(&mut rng, w, h, f, 1, FeatureKind::Logits);
            let labels = (0..w * h)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        IGNORE_LABEL
                    } else {
                        rng.random_range(0..f as u32)
                    }
                })
                .collect();
            let labels = LabelMap::new(w, h, 1, labels).expect("consistent dimensions");
            let out = supervised_ce_loss(&pred, &labels).expect("valid instance");
            worst = worst.max(compare_with_fd(&pred, &out.grad, |m| {
                supervised_ce_loss(m, &labels).unwrap().loss
            }));
            count += 1;
        }
    }
    GradCheckReport {
        kernel: "supervised_ce_loss",
        instances: count,
        max_rel_error: worst,
    }
}

/// All three kernels; `per_combo = 12` gives 108 instances per kernel.
pub fn run_all(per_combo: usize, seed: u64) -> Vec<GradCheckReport> {
    vec![
        check_hinge(per_combo, seed),
        check_ce_corr(per_combo, seed.wrapping_add(1)),
        check_supervised_ce(per_combo, seed.wrapping_add(2)),
    ]
}
