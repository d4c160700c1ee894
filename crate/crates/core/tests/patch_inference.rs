use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seasoncorr::patch_inference::{
    axis_origins, fuse_patch_scores, make_weight_map, plan_tiles, Patch, ScoreGrid, TilePlan, DEFAULT_CENTER_SIZE,
    DEFAULT_PATCH_SIZE, DEFAULT_PATCH_STRIDE, DEFAULT_WEIGHT_FLOOR,
};

fn random_patches(plan: &TilePlan, channels: usize, rng: &mut ChaCha8Rng) -> Vec<Patch<f64>> {
    let p = plan.patch_size;
    plan.origins
        .iter()
        .map(|&(x, y)| Patch {
            x,
            y,
            scores: ScoreGrid::new(
                p,
                p,
                channels,
                (0..p * p * channels).map(|_| rng.random_range(-5.0..5.0)).collect(),
            )
            .unwrap(),
        })
        .collect()
}

/// Ramp weight recomputed from scratch for one pixel of one patch.
fn oracle_weight(px: usize, py: usize, p: usize, c: usize, floor: f64) -> f64 {
    let ramp = |i: usize| {
        let edge = i.min(p - 1 - i) as f64;
        (edge / ((p - c) as f64 / 2.0)).min(1.0)
    };
    (ramp(px) * ramp(py)).max(floor)
}

fn naive_fusion(plan: &TilePlan, patches: &[Patch<f64>], channels: usize, c: usize, floor: f64) -> Vec<f64> {
    let p = plan.patch_size;
    let mut out = Vec::with_capacity(plan.width * plan.height * channels);
    for y in 0..plan.height {
        for x in 0..plan.width {
            for ch in 0..channels {
                let (mut num, mut den) = (0.0, 0.0);
                for pt in patches {
                    if x >= pt.x && x < pt.x + p && y >= pt.y && y < pt.y + p {
                        let w = oracle_weight(x - pt.x, y - pt.y, p, c, floor);
                        num += w * pt.scores.at(x - pt.x, y - pt.y)[ch];
                        den += w;
                    }
                }
                out.push(num / den);
            }
        }
    }
    out
}

#[test]
fn default_plans() {
    let plan = plan_tiles(713, 713, DEFAULT_PATCH_SIZE, DEFAULT_PATCH_STRIDE).unwrap();
    assert_eq!(plan.origins, vec![(0, 0)]);
    assert_eq!(axis_origins(1904, 713, 476), vec![0, 476, 952, 1191]);
    let wide = plan_tiles(1904, 713, 713, 476).unwrap();
    let xs: Vec<usize> = wide.origins.iter().map(|o| o.0).collect();
    assert_eq!(xs, vec![0, 476, 952, 1191]);
}

#[test]
fn coverage_on_random_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let (w, h) = (rng.random_range(713..4000), rng.random_range(713..3000));
        let plan = plan_tiles(w, h, 713, 476).unwrap();
        let (xs, ys) = (axis_origins(w, 713, 476), axis_origins(h, 713, 476));
        assert_eq!(plan.origins.len(), xs.len() * ys.len());
        // every column (and row) lies in some patch; patches stay inside
        for (origins, extent) in [(&xs, w), (&ys, h)] {
            assert!(origins.iter().all(|&o| o + 713 <= extent));
            assert_eq!(origins[0], 0);
            assert_eq!(origins.last().unwrap() + 713, extent);
            assert!(origins.windows(2).all(|p| p[1] > p[0] && p[1] - p[0] <= 476));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_pixel_is_covered(w in 1usize..300, h in 1usize..300, patch in 1usize..120, stride_frac in 0.05..1.0f64) {
        let stride = ((patch as f64 * stride_frac).ceil() as usize).clamp(1, patch);
        prop_assume!(w >= patch && h >= patch);
        let plan = plan_tiles(w, h, patch, stride).unwrap();
        let mut covered = vec![false; w * h];
        for &(x, y) in &plan.origins {
            prop_assert!(x + patch <= w && y + patch <= h);
            for yy in y..y + patch {
                for xx in x..x + patch {
                    covered[yy * w + xx] = true;
                }
            }
        }
        prop_assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn weight_map_is_flip_symmetric(p in 2usize..60, c_frac in 0.0..1.0f64) {
        let c = ((p as f64 * c_frac) as usize).clamp(1, p);
        let wm = make_weight_map(p, c, 1e-6f64).unwrap();
        for y in 0..p {
            for x in 0..p {
                let w = wm.at(x, y);
                prop_assert_eq!(w, wm.at(p - 1 - x, y));
                prop_assert_eq!(w, wm.at(x, p - 1 - y));
                prop_assert!((1e-6..=1.0).contains(&w));
                prop_assert_eq!(w, oracle_weight(x, y, p, c, 1e-6));
            }
        }
    }

    #[test]
    fn fusion_is_convex_and_order_free(seed in any::<u64>(), w in 12usize..40, h in 12usize..40, agree in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = plan_tiles(w, h, 12, 5).unwrap();
        let wm = make_weight_map(12, 4, 1e-6).unwrap();
        let mut patches = random_patches(&plan, 2, &mut rng);
        if agree {
            let shared = patches[0].scores.clone();
            for p in &mut patches {
                p.scores = shared.clone();
            }
        }
        let fused = fuse_patch_scores(&plan, &wm, &patches).unwrap();
        for y in 0..h {
            for x in 0..w {
                for ch in 0..2 {
                    let vals: Vec<f64> = patches
                        .iter()
                        .filter(|p| x >= p.x && x < p.x + 12 && y >= p.y && y < p.y + 12)
                        .map(|p| p.scores.at(x - p.x, y - p.y)[ch])
                        .collect();
                    let v = fused.at(x, y)[ch];
                    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(v >= lo && v <= hi);
                    if lo == hi {
                        prop_assert_eq!(v, lo);
                    }
                }
            }
        }
        patches.reverse();
        let len = patches.len();
        patches.swap(0, len / 2);
        prop_assert_eq!(fuse_patch_scores(&plan, &wm, &patches).unwrap(), fused);
    }
}

#[test]
fn fusion_matches_naive_oracle_on_full_size_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let plan = plan_tiles(1024, 800, DEFAULT_PATCH_SIZE, DEFAULT_PATCH_STRIDE).unwrap();
    let wm = make_weight_map(DEFAULT_PATCH_SIZE, DEFAULT_CENTER_SIZE, DEFAULT_WEIGHT_FLOOR).unwrap();
    let patches = random_patches(&plan, 2, &mut rng);
    let fused = fuse_patch_scores(&plan, &wm, &patches).unwrap();
    let oracle = naive_fusion(&plan, &patches, 2, DEFAULT_CENTER_SIZE, DEFAULT_WEIGHT_FLOOR);
    let worst = fused
        .values()
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn single_patch_is_reproduced_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let plan = plan_tiles(713, 713, 713, 476).unwrap();
    let wm = make_weight_map(713, 236, 1e-6).unwrap();
    let patches = random_patches(&plan, 3, &mut rng);
    let fused = fuse_patch_scores(&plan, &wm, &patches).unwrap();
    assert_eq!(fused, patches[0].scores);
}

#[test]
fn f32_fusion_tracks_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let plan = plan_tiles(40, 30, 16, 9).unwrap();
    let patches = random_patches(&plan, 2, &mut rng);
    let p32: Vec<Patch<f32>> = patches
        .iter()
        .map(|p| Patch {
            x: p.x,
            y: p.y,
            scores: ScoreGrid::new(16, 16, 2, p.scores.values().iter().map(|&v| v as f32).collect()).unwrap(),
        })
        .collect();
    let a = fuse_patch_scores(&plan, &make_weight_map(16, 6, 1e-6).unwrap(), &patches).unwrap();
    let b = fuse_patch_scores(&plan, &make_weight_map(16, 6, 1e-6f32).unwrap(), &p32).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - *y as f64).abs() < 1e-4);
    }
}
