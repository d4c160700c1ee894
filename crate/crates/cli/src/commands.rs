use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use seasoncorr::dataset::{
    compute_statistics, read_cloud, read_depth_map, read_manifest, read_patch_scores, read_poses, read_sample,
    write_cloud, write_depth_map, write_fused_scores, write_manifest, write_poses, write_sample, CorrespondenceSample,
    ViewCatalog,
};
use seasoncorr::loss::gradcheck;
use seasoncorr::patch_inference::{fuse_patch_scores, make_weight_map, plan_tiles};
use seasoncorr::pointcloud::{annotate_visibility, fuse_depth_maps};
use seasoncorr::synth::{evaluate_against, generate_scene, SynthConfig};
use seasoncorr::{generate_correspondences, PointCloud};

use crate::config::{ConfigFile, Overrides, PipelineConfig, Profile};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

pub fn resolve(flags: &Overrides, config: Option<&Path>) -> Result<PipelineConfig> {
    PipelineConfig::resolve(flags, &ConfigFile::load(config)?)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Prefixes library errors with the offending file.
fn in_file<T>(path: &Path, r: seasoncorr::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn load_catalog(path: &Path) -> Result<ViewCatalog> {
    in_file(path, read_poses(open(path)?))
}

/// Files in `dir` with the given extension, sorted by name.
fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::usage(e.to_string()))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::internal(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn fuse(poses: &Path, depth_dir: &Path, traversal: Option<&str>, out: &Path, cfg: &PipelineConfig) -> Result<()> {
    let catalog = load_catalog(poses)?;
    let mut pairs = Vec::new();
    for path in files_with_extension(depth_dir, "depth")? {
        let dm = in_file(&path, read_depth_map(open(&path)?))?;
        let view = catalog
            .get(dm.view_id)
            .ok_or_else(|| CliError::usage(format!("{}: view {} not in poses", path.display(), dm.view_id)))?;
        if traversal.is_none_or(|t| view.traversal_id() == t) {
            pairs.push((view.clone(), dm));
        }
    }
    if pairs.is_empty() {
        return Err(CliError::usage(format!(
            "no depth maps to fuse in {}",
            depth_dir.display()
        )));
    }
    let traversals: BTreeSet<&str> = pairs.iter().map(|(v, _)| v.traversal_id()).collect();
    if traversals.len() > 1 {
        return Err(CliError::usage(format!(
            "depth maps span traversals {traversals:?}; choose one with --traversal"
        )));
    }
    pairs.sort_by_key(|(v, _)| v.view_id());
    let (views, depths): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let cloud = with_pool(cfg.threads, || fuse_depth_maps(&views, &depths, &cfg.fusion))??;
    let mut w = create(out)?;
    write_cloud(&cloud, &mut w)?;
    finish(w, out)?;
    println!("points\t{}", cloud.len());
    Ok(())
}

/// Traversal of a cloud read from disk: given explicitly, or the single
/// traversal owning all views in its visibility sets.
fn cloud_traversal(cloud: &PointCloud, catalog: &ViewCatalog, explicit: Option<&str>, path: &Path) -> Result<String> {
    if let Some(t) = explicit {
        if catalog.traversal(t).is_empty() {
            return Err(CliError::usage(format!(
                "traversal {t:?} has no views in the poses file"
            )));
        }
        return Ok(t.to_string());
    }
    let mut found = BTreeSet::new();
    for id in cloud.visibility().iter().flatten() {
        let view = catalog
            .get(*id)
            .ok_or_else(|| CliError::usage(format!("{}: view {id} not in poses", path.display())))?;
        found.insert(view.traversal_id());
    }
    match found.len() {
        1 => Ok(found.into_iter().next().unwrap_or_default().to_string()),
        0 => Err(CliError::usage(format!(
            "{}: no visibility information; pass the traversal explicitly",
            path.display()
        ))),
        _ => Err(CliError::usage(format!(
            "{}: points are visible in several traversals {found:?}",
            path.display()
        ))),
    }
}

fn load_cloud(path: &Path, catalog: &ViewCatalog, explicit: Option<&str>, cfg: &PipelineConfig) -> Result<PointCloud> {
    let raw = in_file(path, read_cloud(open(path)?, ""))?;
    let traversal = cloud_traversal(&raw, catalog, explicit, path)?;
    let cloud = PointCloud::new(traversal, raw.positions().to_vec(), raw.visibility().to_vec())?;
    let has_visibility = cloud.visibility().iter().any(|v| !v.is_empty());
    if cfg.profile == Profile::Robotcar || !has_visibility {
        let views = catalog.traversal(cloud.traversal_id());
        return Ok(annotate_visibility(&cloud, &views, cfg.visibility_tol)?);
    }
    Ok(cloud)
}

pub struct MatchInputs<'a> {
    pub ref_cloud: &'a Path,
    pub tgt_cloud: &'a Path,
    pub poses: &'a Path,
    pub out: &'a Path,
    pub ref_traversal: Option<&'a str>,
    pub tgt_traversal: Option<&'a str>,
}

pub fn run_match(inputs: &MatchInputs, cfg: &PipelineConfig) -> Result<()> {
    let catalog = load_catalog(inputs.poses)?;
    let output = with_pool(cfg.threads, || -> Result<_> {
        let cloud_ref = load_cloud(inputs.ref_cloud, &catalog, inputs.ref_traversal, cfg)?;
        let cloud_tgt = load_cloud(inputs.tgt_cloud, &catalog, inputs.tgt_traversal, cfg)?;
        let condition = cfg
            .condition
            .clone()
            .unwrap_or_else(|| cloud_tgt.traversal_id().to_string());
        Ok(generate_correspondences(
            &cloud_ref,
            &cloud_tgt,
            &catalog.to_vec(),
            &cfg.matching,
            &condition,
        )?)
    })??;
    mkdir(inputs.out)?;
    let mut names = Vec::with_capacity(output.samples.len());
    for sample in &output.samples {
        let name = sample.file_name();
        let path = inputs.out.join(&name);
        let mut w = create(&path)?;
        write_sample(sample, &mut w)?;
        finish(w, &path)?;
        names.push(name);
    }
    let manifest = inputs.out.join("manifest.txt");
    let mut w = create(&manifest)?;
    write_manifest(&names, &mut w)?;
    finish(w, &manifest)?;
    let total: usize = output.samples.iter().map(CorrespondenceSample::len).sum();
    println!("mutual_matches\t{}", output.matches.len());
    println!("camera_pairs\t{}", output.camera_pairs.len());
    println!("samples\t{}", output.samples.len());
    println!("correspondences\t{total}");
    Ok(())
}

fn load_samples(manifest: &Path) -> Result<Vec<CorrespondenceSample>> {
    in_file(manifest, read_manifest(manifest))?
        .iter()
        .map(|p| in_file(p, read_sample(open(p)?, None)))
        .collect()
}

pub fn stats(manifest: &Path) -> Result<()> {
    let samples = load_samples(manifest)?;
    print!("{}", compute_statistics(&samples).to_tsv());
    Ok(())
}

pub fn losscheck(seed: u64, per_combo: usize) -> Result<()> {
    if per_combo == 0 {
        return Err(CliError::usage("per_combo must be at least 1"));
    }
    let reports = gradcheck::run_all(per_combo, seed);
    println!("kernel\tinstances\tmax_rel_error\tstatus");
    for r in &reports {
        let status = if r.passed() { "ok" } else { "FAIL" };
        println!("{}\t{}\t{:.3e}\t{status}", r.kernel, r.instances, r.max_rel_error);
    }
    match reports.iter().find(|r| !r.passed()) {
        None => Ok(()),
        Some(r) => Err(CliError::internal(format!(
            "{} gradient check failed: max relative error {:.3e} >= {:.0e}",
            r.kernel,
            r.max_rel_error,
            gradcheck::MAX_REL_ERROR
        ))),
    }
}

/// Layout under `out`: `poses.txt`, `conditions.tsv`, `clouds/<traversal>.ply`,
/// `depth/<view_id>.depth`, and reference-vs-other ground truth in `gt/`.
pub fn synth(seed: u64, out: &Path, traversals: usize, views: usize, sigma: f64, dropout: f64) -> Result<()> {
    let cfg = SynthConfig {
        traversals,
        views_per_traversal: views,
        sigma,
        dropout,
        ..SynthConfig::default()
    };
    let g = generate_scene(&cfg, seed)?;
    for dir in ["clouds", "depth", "gt"] {
        mkdir(&out.join(dir))?;
    }

    let path = out.join("poses.txt");
    let mut w = create(&path)?;
    write_poses(g.scene.views(), &mut w)?;
    finish(w, &path)?;

    let path = out.join("conditions.tsv");
    let mut w = create(&path)?;
    for t in &g.scene.traversals {
        writeln!(w, "{}\t{}", t.id, t.condition).map_err(|e| CliError::usage(e.to_string()))?;
    }
    finish(w, &path)?;

    for cloud in &g.clouds {
        let path = out.join("clouds").join(format!("{}.ply", cloud.traversal_id()));
        let mut w = create(&path)?;
        write_cloud(cloud, &mut w)?;
        finish(w, &path)?;
    }
    for dm in &g.depth_maps {
        let path = out.join("depth").join(format!("{}.depth", dm.view_id));
        let mut w = create(&path)?;
        write_depth_map(dm, &mut w)?;
        finish(w, &path)?;
    }

    let mut names = Vec::new();
    for k in 1..g.scene.traversals.len() {
        for sample in g.scene.ground_truth(0, k)? {
            let name = sample.file_name();
            let path = out.join("gt").join(&name);
            let mut w = create(&path)?;
            write_sample(&sample, &mut w)?;
            finish(w, &path)?;
            names.push(name);
        }
    }
    let path = out.join("gt").join("manifest.txt");
    let mut w = create(&path)?;
    write_manifest(&names, &mut w)?;
    finish(w, &path)?;

    println!("surface_samples\t{}", g.scene.samples.len());
    for cloud in &g.clouds {
        println!("cloud_{}\t{}", cloud.traversal_id(), cloud.len());
    }
    println!("ground_truth_samples\t{}", names.len());
    Ok(())
}

pub fn eval(generated: &Path, ground_truth: &Path, pixel_tol: f64) -> Result<()> {
    let generated = load_samples(generated)?;
    let truth = load_samples(ground_truth)?;
    let r = evaluate_against(&generated, &truth, pixel_tol)?;
    println!("emitted\t{}", r.emitted);
    println!("correct\t{}", r.correct);
    println!("precision\t{:.6}", r.precision);
    println!("precision_defined\t{}", r.precision_defined);
    println!("ground_truth_total\t{}", r.ground_truth_total);
    println!("ground_truth_matched\t{}", r.ground_truth_matched);
    println!("recall\t{:.6}", r.recall);
    Ok(())
}

pub fn fuse_scores(
    inputs: &[PathBuf],
    (width, height): (usize, usize),
    stride: usize,
    center: usize,
    weight_floor: f64,
    out: &Path,
) -> Result<()> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            files.extend(files_with_extension(input, "scores")?);
        } else {
            files.push(input.clone());
        }
    }
    let patches = files
        .iter()
        .map(|p| in_file(p, read_patch_scores(open(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let Some(first) = patches.first() else {
        return Err(CliError::usage("no patch score files given"));
    };
    let patch_size = first.scores.width();
    let plan = plan_tiles(width, height, patch_size, stride)?;
    let weights = make_weight_map(patch_size, center, weight_floor)?;
    let fused = fuse_patch_scores(&plan, &weights, &patches)?;
    let mut w = create(out)?;
    write_fused_scores(&fused, &mut w)?;
    finish(w, out)
}
