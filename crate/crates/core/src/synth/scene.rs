use std::collections::BTreeMap;

use super::rng::{entity_id, Entity, Stream};
use crate::dataset::{CorrespondenceSample, ImageRef};
use crate::error::{Error, Result};
use crate::geometry::{CameraView, Intrinsics, Pixel, Quaternion, Vec3, ViewId};
use crate::loss::LabelMap;
use crate::pointcloud::{DepthMap, PointCloud};

/// Cityscapes-style class ids used by the default street.
pub mod class {
    pub const ROAD: u32 = 0;
    pub const SIDEWALK: u32 = 1;
    pub const BUILDING: u32 = 2;
    pub const WALL: u32 = 3;
    pub const POLE: u32 = 5;
    pub const VEGETATION: u32 = 8;
    pub const CAR: u32 = 13;
}

/// Ray hits closer than this (as a fraction of the segment) are ignored.
const RAY_EPS: f64 = 1e-9;
/// A surface point is occluded only by hits before `1 - OCCLUSION_EPS`.
const OCCLUSION_EPS: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Rectangle `[x0, x1] x [y0, y1]` on the plane `z = 0`.
    Ground { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// Axis-aligned box; every face except the bottom is sampled.
    Cuboid { min: Vec3<f64>, max: Vec3<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Surface {
    pub name: String,
    pub class_id: u32,
    pub shape: Shape,
}

impl Surface {
    pub fn ground(name: &str, class_id: u32, x: (f64, f64), y: (f64, f64)) -> Self {
        Self {
            name: name.into(),
            class_id,
            shape: Shape::Ground {
                x0: x.0,
                x1: x.1,
                y0: y.0,
                y1: y.1,
            },
        }
    }

    pub fn cuboid(name: &str, class_id: u32, min: [f64; 3], max: [f64; 3]) -> Self {
        Self {
            name: name.into(),
            class_id,
            shape: Shape::Cuboid {
                min: Vec3::new(min[0], min[1], min[2]),
                max: Vec3::new(max[0], max[1], max[2]),
            },
        }
    }

    fn is_valid(&self) -> bool {
        match &self.shape {
            Shape::Ground { x0, x1, y0, y1 } => x0 < x1 && y0 < y1,
            Shape::Cuboid { min, max } => (0..3).all(|a| min.axis(a) < max.axis(a)),
        }
    }

    /// Smallest ray parameter `t > RAY_EPS` where `o + t d` meets the surface.
    pub fn intersect(&self, o: &Vec3<f64>, d: &Vec3<f64>) -> Option<f64> {
        match &self.shape {
            Shape::Ground { x0, x1, y0, y1 } => {
                if d.z == 0.0 {
                    return None;
                }
                let t = -o.z / d.z;
                let (x, y) = (o.x + t * d.x, o.y + t * d.y);
                (t > RAY_EPS && x >= *x0 && x <= *x1 && y >= *y0 && y <= *y1).then_some(t)
            }
            Shape::Cuboid { min, max } => {
                let (mut near, mut far) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in 0..3 {
                    let (oa, da) = (o.axis(a), d.axis(a));
                    if da == 0.0 {
                        if oa < min.axis(a) || oa > max.axis(a) {
                            return None;
                        }
                        continue;
                    }
                    let (t0, t1) = ((min.axis(a) - oa) / da, (max.axis(a) - oa) / da);
                    near = near.max(t0.min(t1));
                    far = far.min(t0.max(t1));
                }
                if near > far {
                    None
                } else if near > RAY_EPS {
                    Some(near)
                } else if far > RAY_EPS {
                    Some(far)
                } else {
                    None
                }
            }
        }
    }

    /// Cell centers of a grid with pitch close to `spacing` on every sampled face.
    pub fn samples(&self, spacing: f64) -> Vec<Vec3<f64>> {
        let cells = |len: f64| ((len / spacing).round() as usize).max(1);
        let grid = |a: (f64, f64), b: (f64, f64), f: &mut dyn FnMut(f64, f64)| {
            let (na, nb) = (cells(a.1 - a.0), cells(b.1 - b.0));
            let (sa, sb) = ((a.1 - a.0) / na as f64, (b.1 - b.0) / nb as f64);
            for i in 0..na {
                for j in 0..nb {
                    f(a.0 + (i as f64 + 0.5) * sa, b.0 + (j as f64 + 0.5) * sb);
                }
            }
        };
        let mut out = Vec::new();
        match &self.shape {
            Shape::Ground { x0, x1, y0, y1 } => {
                grid((*x0, *x1), (*y0, *y1), &mut |x, y| out.push(Vec3::new(x, y, 0.0)));
            }
            Shape::Cuboid { min, max } => {
                let (xs, ys, zs) = ((min.x, max.x), (min.y, max.y), (min.z, max.z));
                grid(xs, ys, &mut |x, y| out.push(Vec3::new(x, y, max.z)));
                for y in [min.y, max.y] {
                    grid(xs, zs, &mut |x, z| out.push(Vec3::new(x, y, z)));
                }
                for x in [min.x, max.x] {
                    grid(ys, zs, &mut |y, z| out.push(Vec3::new(x, y, z)));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Number of traversals; the first one is the reference.
    pub traversals: usize,
    /// Condition tag per traversal; missing entries become `condition <k>`.
    pub conditions: Vec<String>,
    pub views_per_traversal: usize,
    /// Distance between consecutive cameras along the road (meters).
    pub view_spacing: f64,
    pub camera_height: f64,
    /// Extra camera offset per traversal index.
    pub traversal_offset: Vec3<f64>,
    /// Uniform camera position jitter half-width (meters).
    pub position_jitter: f64,
    /// Uniform yaw jitter half-width (degrees).
    pub yaw_jitter_deg: f64,
    pub intrinsics: Intrinsics<f64>,
    /// Pitch of the surface sample grid (meters).
    pub sample_spacing: f64,
    /// Per-axis Gaussian noise on every observed point (meters).
    pub sigma: f64,
    /// Probability that a traversal misses a surface sample.
    pub dropout: f64,
    /// Points farther than this from a camera are not observed by it.
    pub max_range: f64,
    /// `None` uses [`street_surfaces`].
    pub surfaces: Option<Vec<Surface>>,
    pub render_depth: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            traversals: 3,
            conditions: vec![
                "Sunny + Foliage".into(),
                "Overcast + Mixed Foliage".into(),
                "Low Sun + Snow".into(),
            ],
            views_per_traversal: 8,
            view_spacing: 1.0,
            camera_height: 1.6,
            traversal_offset: Vec3::new(0.1, 0.12, 0.0),
            position_jitter: 0.03,
            yaw_jitter_deg: 2.0,
            intrinsics: Intrinsics {
                fx: 300.0,
                fy: 300.0,
                cx: 320.0,
                cy: 240.0,
                width: 640,
                height: 480,
            },
            sample_spacing: 0.25,
            sigma: 0.0,
            dropout: 0.0,
            max_range: 20.0,
            surfaces: None,
            render_depth: true,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.traversals < 2 {
            return Err(Error::invalid("a synthetic scene needs at least 2 traversals"));
        }
        if self.views_per_traversal < 2 {
            return Err(Error::invalid("each traversal needs at least 2 views"));
        }
        if self.surfaces.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(Error::invalid("a synthetic scene needs at least one surface"));
        }
        if self.surfaces.iter().flatten().any(|s| !s.is_valid()) {
            return Err(Error::invalid("surface extents must be nonempty"));
        }
        if !(self.sample_spacing > 0.0) || !(self.max_range > 0.0) || !(self.view_spacing >= 0.0) {
            return Err(Error::invalid("sample spacing and max range must be positive"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        Ok(())
    }

    fn route_length(&self) -> f64 {
        (self.views_per_traversal - 1) as f64 * self.view_spacing
    }
}

/// Road, sidewalk, a facade, a wall, a pole, a hedge and a parked car,
/// laid out to the +y side of a route along the x axis.
pub fn street_surfaces(route_length: f64) -> Vec<Surface> {
    let (x0, x1) = (-6.0, route_length + 6.0);
    vec![
        Surface::ground("road", class::ROAD, (x0, x1), (1.0, 3.5)),
        Surface::ground("sidewalk", class::SIDEWALK, (x0, x1), (3.5, 10.0)),
        Surface::cuboid("facade", class::BUILDING, [x0, 10.0, 0.0], [x1, 12.0, 8.0]),
        Surface::cuboid("wall", class::WALL, [4.5, 7.0, 0.0], [6.5, 7.4, 1.4]),
        Surface::cuboid("pole", class::POLE, [2.0, 6.0, 0.0], [2.3, 6.3, 4.0]),
        Surface::cuboid("hedge", class::VEGETATION, [-4.0, 8.0, 0.0], [-1.0, 9.0, 1.0]),
        Surface::cuboid("car", class::CAR, [-2.0, 4.0, 0.0], [2.2, 5.8, 1.2]),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Traversal {
    pub id: String,
    pub condition: String,
    pub views: Vec<CameraView<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub surface: usize,
    pub class_id: u32,
    pub position: Vec3<f64>,
}

/// Scene geometry plus ground truth: for every surface sample, its noisy
/// position in each traversal and its pixel in every view that sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub seed: u64,
    pub sigma: f64,
    pub dropout: f64,
    pub max_range: f64,
    pub surfaces: Vec<Surface>,
    pub traversals: Vec<Traversal>,
    pub samples: Vec<SurfaceSample>,
    /// `observed[k][s]`: position of sample `s` in traversal `k`'s cloud.
    pub observed: Vec<Vec<Option<Vec3<f64>>>>,
    /// Per view, `(sample id, pixel)` sorted by sample id.
    pub pixels: BTreeMap<ViewId, Vec<(usize, Pixel<f64>)>>,
}

/// Output of [`generate_scene`].
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedScene {
    pub scene: SyntheticScene,
    /// One cloud per traversal.
    pub clouds: Vec<PointCloud<f64>>,
    /// Sample id of every cloud point.
    pub cloud_samples: Vec<Vec<usize>>,
    /// One depth map per view in traversal order; empty unless rendering was requested.
    pub depth_maps: Vec<DepthMap>,
}

fn camera(cfg: &SynthConfig, seed: u64, k: usize, j: usize, id: &str) -> Result<CameraView<f64>> {
    let mut rng = Stream::new(seed, entity_id(Entity::Camera, k, j));
    let pj = cfg.position_jitter;
    let jitter = Vec3::new(rng.range(-pj, pj), rng.range(-pj, pj), rng.range(-pj, pj));
    let yaw = rng.range(-cfg.yaw_jitter_deg, cfg.yaw_jitter_deg).to_radians();
    let center =
        Vec3::new(j as f64 * cfg.view_spacing, 0.0, cfg.camera_height) + cfg.traversal_offset * k as f64 + jitter;
    // camera z along world +y, camera y along world -z, then yaw about world z
    let look = Quaternion::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), std::f64::consts::FRAC_PI_2);
    let q = look.mul(&Quaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), -yaw));
    let r = q.to_rotation_matrix();
    let t = -r.mul_vec(&center);
    let view_id = ViewId((k * 1000 + j) as u32);
    CameraView::new(view_id, id, format!("images/{view_id}.png"), q, t, cfg.intrinsics)
}

impl SyntheticScene {
    pub fn views(&self) -> impl Iterator<Item = &CameraView<f64>> {
        self.traversals.iter().flat_map(|t| t.views.iter())
    }

    pub fn all_views(&self) -> Vec<CameraView<f64>> {
        self.views().cloned().collect()
    }

    pub fn view(&self, id: ViewId) -> Option<&CameraView<f64>> {
        self.views().find(|v| v.view_id() == id)
    }

    pub fn traversal_index(&self, id: &str) -> Option<usize> {
        self.traversals.iter().position(|t| t.id == id)
    }

    /// First surface hit along `o + t d`, as `(t, surface index)`.
    pub fn cast(&self, o: &Vec3<f64>, d: &Vec3<f64>) -> Option<(f64, usize)> {
        self.surfaces
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.intersect(o, d).map(|t| (t, i)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    /// True if nothing blocks the segment from `center` to `p` and `p` is in range.
    pub fn unoccluded(&self, center: &Vec3<f64>, p: &Vec3<f64>) -> bool {
        let d = *p - *center;
        if d.norm() > self.max_range {
            return false;
        }
        !self
            .surfaces
            .iter()
            .any(|s| s.intersect(center, &d).is_some_and(|t| t < 1.0 - OCCLUSION_EPS))
    }

    pub fn pixel_of(&self, view: ViewId, sample: usize) -> Option<Pixel<f64>> {
        let list = self.pixels.get(&view)?;
        list.binary_search_by_key(&sample, |&(s, _)| s).ok().map(|i| list[i].1)
    }

    /// Ground-truth correspondences for every (reference view, target view)
    /// pair of the two traversals with at least one co-visible sample.
    pub fn ground_truth(&self, ref_traversal: usize, tgt_traversal: usize) -> Result<Vec<CorrespondenceSample>> {
        let (Some(rt), Some(tt)) = (self.traversals.get(ref_traversal), self.traversals.get(tgt_traversal)) else {
            return Err(Error::invalid("traversal index out of range"));
        };
        let mut out = Vec::new();
        for rv in &rt.views {
            let ref_px = &self.pixels[&rv.view_id()];
            for tv in &tt.views {
                let (x_ref, x_tgt): (Vec<_>, Vec<_>) = ref_px
                    .iter()
                    .filter_map(|&(s, pr)| self.pixel_of(tv.view_id(), s).map(|pt| (pr, pt)))
                    .unzip();
                if x_ref.is_empty() {
                    continue;
                }
                out.push(CorrespondenceSample::new(
                    ImageRef::of_view(rv),
                    ImageRef::of_view(tv),
                    tt.condition.as_str(),
                    x_ref,
                    x_tgt,
                )?);
            }
        }
        Ok(out)
    }

    /// Ray-cast depth (camera z) per pixel center; 0 where nothing is hit in range.
    pub fn render_depth(&self, view: &CameraView<f64>) -> DepthMap {
        let mut dm = DepthMap::empty(view.view_id(), view.width(), view.height());
        self.for_each_pixel_hit(view, |col, row, hit| {
            if let Some((t, _)) = hit {
                dm.set(col, row, t as f32);
            }
        });
        dm
    }

    /// Class id of the first surface hit per pixel, `IGNORE_LABEL` elsewhere.
    pub fn render_labels(&self, view: &CameraView<f64>) -> LabelMap {
        let (w, h) = (view.width() as usize, view.height() as usize);
        let mut labels = vec![crate::loss::IGNORE_LABEL; w * h];
        self.for_each_pixel_hit(view, |col, row, hit| {
            if let Some((_, s)) = hit {
                labels[row as usize * w + col as usize] = self.surfaces[s].class_id;
            }
        });
        LabelMap::new(w, h, 1, labels).expect("dimensions match the view")
    }

    fn for_each_pixel_hit(&self, view: &CameraView<f64>, mut f: impl FnMut(u32, u32, Option<(f64, usize)>)) {
        let k = view.intrinsics();
        let c = view.camera_center();
        let r = view.rotation_matrix();
        for row in 0..view.height() {
            for col in 0..view.width() {
                let dir_cam = Vec3::new((col as f64 - k.cx) / k.fx, (row as f64 - k.cy) / k.fy, 1.0);
                let dir = r.transpose_mul_vec(&dir_cam);
                // unit camera depth per unit t, so t is the depth
                let hit = self.cast(&c, &dir).filter(|&(t, _)| t * dir.norm() <= self.max_range);
                f(col, row, hit);
            }
        }
    }
}

/// Builds a scene deterministically from `(config, seed)`.
///
/// Every surface sample seen unoccluded (within range) by at least one camera
/// of any traversal enters the clouds, minus per-traversal dropout, displaced
/// by per-traversal Gaussian noise. A traversal's visibility set for a point
/// lists its views with an unoccluded ray to the true sample position whose
/// noisy position projects inside the image; that projection is the
/// ground-truth pixel.
pub fn generate_scene(config: &SynthConfig, seed: u64) -> Result<GeneratedScene> {
    config.validate()?;
    let surfaces = config
        .surfaces
        .clone()
        .unwrap_or_else(|| street_surfaces(config.route_length()));

    let traversals = (0..config.traversals)
        .map(|k| {
            let id = format!("t{k}");
            let condition = config
                .conditions
                .get(k)
                .cloned()
                .unwrap_or_else(|| format!("condition {k}"));
            crate::dataset::validate_condition_tag(&condition)?;
            let views = (0..config.views_per_traversal)
                .map(|j| camera(config, seed, k, j, &id))
                .collect::<Result<Vec<_>>>()?;
            Ok(Traversal { id, condition, views })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut scene = SyntheticScene {
        seed,
        sigma: config.sigma,
        dropout: config.dropout,
        max_range: config.max_range,
        surfaces,
        traversals,
        samples: Vec::new(),
        observed: Vec::new(),
        pixels: BTreeMap::new(),
    };

    let centers: Vec<Vec<Vec3<f64>>> = scene
        .traversals
        .iter()
        .map(|t| t.views.iter().map(|v| v.camera_center()).collect())
        .collect();
    let mut samples = Vec::new();
    let mut seen_by: Vec<Vec<Vec<usize>>> = Vec::new();
    for (si, s) in scene.surfaces.iter().enumerate() {
        for p in s.samples(config.sample_spacing) {
            let seen: Vec<Vec<usize>> = centers
                .iter()
                .map(|cs| (0..cs.len()).filter(|&j| scene.unoccluded(&cs[j], &p)).collect())
                .collect();
            if seen.iter().all(|v| v.is_empty()) {
                continue;
            }
            samples.push(SurfaceSample {
                surface: si,
                class_id: s.class_id,
                position: p,
            });
            seen_by.push(seen);
        }
    }

    let mut observed = vec![vec![None; samples.len()]; scene.traversals.len()];
    let mut pixels: BTreeMap<ViewId, Vec<(usize, Pixel<f64>)>> =
        scene.views().map(|v| (v.view_id(), Vec::new())).collect();
    let mut clouds = Vec::new();
    let mut cloud_samples = Vec::new();
    for (k, trav) in scene.traversals.iter().enumerate() {
        let (mut positions, mut visibility, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for (s, sample) in samples.iter().enumerate() {
            if config.dropout > 0.0 && Stream::new(seed, entity_id(Entity::Dropout, k, s)).uniform() < config.dropout {
                continue;
            }
            let mut noise = Stream::new(seed, entity_id(Entity::PointNoise, k, s));
            let p = sample.position + Vec3::new(noise.normal(), noise.normal(), noise.normal()) * config.sigma;
            observed[k][s] = Some(p);
            let mut vis = Vec::new();
            for &j in &seen_by[s][k] {
                let view = &trav.views[j];
                if let Some(pr) = view.project(&p) {
                    vis.push(view.view_id());
                    pixels.get_mut(&view.view_id()).expect("known view").push((s, pr.pixel));
                }
            }
            positions.push(p);
            visibility.push(vis);
            ids.push(s);
        }
        clouds.push(PointCloud::new(trav.id.as_str(), positions, visibility)?);
        cloud_samples.push(ids);
    }
    scene.samples = samples;
    scene.observed = observed;
    scene.pixels = pixels;

    let depth_maps = if config.render_depth {
        scene.views().map(|v| scene.render_depth(v)).collect()
    } else {
        Vec::new()
    };
    Ok(GeneratedScene {
        scene,
        clouds,
        cloud_samples,
        depth_maps,
    })
}
