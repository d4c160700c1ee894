#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, Profile};

/// Cross-condition correspondence generation and its test oracles.
#[derive(Parser, Debug)]
#[command(name = "seasoncorr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fuse the depth maps of one traversal into a point cloud.
    Fuse(FuseArgs),
    /// Match two traversal clouds and write correspondence samples.
    Match(MatchArgs),
    /// Per-condition pair counts and mean correspondences of a dataset.
    Stats {
        /// Manifest listing one sample file per line.
        manifest: PathBuf,
    },
    /// Finite-difference check of the loss gradients.
    Losscheck {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Random instances per (F, N) combination.
        #[arg(long, default_value_t = 12)]
        per_combo: usize,
    },
    /// Generate a synthetic multi-traversal scene with ground truth.
    Synth(SynthArgs),
    /// Precision and recall of generated samples against ground truth.
    Eval {
        /// Manifest of the samples to score.
        #[arg(long)]
        generated: PathBuf,
        /// Manifest of the ground-truth samples.
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, default_value_t = seasoncorr::synth::DEFAULT_PIXEL_TOL)]
        pixel_tol: f64,
    },
    /// Fuse overlapping patch score files into a full-image score grid.
    FuseScores(FuseScoresArgs),
}

#[derive(Args, Debug, Default)]
struct PipelineFlags {
    /// `key = value` file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    #[arg(long)]
    threads: Option<usize>,
    /// Relative depth tolerance of the z-buffer visibility test.
    #[arg(long)]
    visibility_tol: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct FusionFlags {
    #[arg(long)]
    pixel_stride: Option<u32>,
    #[arg(long)]
    merge_radius: Option<f64>,
    #[arg(long)]
    min_views: Option<usize>,
}

#[derive(Args, Debug)]
struct FuseArgs {
    #[arg(long)]
    poses: PathBuf,
    /// Directory of `.depth` files.
    #[arg(long)]
    depth_dir: PathBuf,
    /// Only fuse views of this traversal.
    #[arg(long)]
    traversal: Option<String>,
    /// Output cloud file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[command(flatten)]
    fusion: FusionFlags,
}

#[derive(Args, Debug)]
struct MatchArgs {
    #[arg(long)]
    ref_cloud: PathBuf,
    #[arg(long)]
    tgt_cloud: PathBuf,
    #[arg(long)]
    poses: PathBuf,
    /// Output directory for `<ref>_<tgt>.corr` files and `manifest.txt`.
    #[arg(long)]
    out: PathBuf,
    /// Traversal of the reference cloud; inferred from its visibility sets if omitted.
    #[arg(long)]
    ref_traversal: Option<String>,
    #[arg(long)]
    tgt_traversal: Option<String>,
    /// Condition tag written to every sample; defaults to the target traversal id.
    #[arg(long)]
    condition: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    min_common: Option<usize>,
    #[arg(long)]
    max_cam_dist: Option<f64>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    traversals: usize,
    #[arg(long, default_value_t = 8)]
    views: usize,
    /// Per-axis point noise, meters.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
}

#[derive(Args, Debug)]
struct FuseScoresArgs {
    /// Patch score files, or directories of `.scores` files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long, default_value_t = seasoncorr::patch_inference::DEFAULT_PATCH_STRIDE)]
    stride: usize,
    #[arg(long, default_value_t = seasoncorr::patch_inference::DEFAULT_CENTER_SIZE)]
    center: usize,
    #[arg(long, default_value_t = seasoncorr::patch_inference::DEFAULT_WEIGHT_FLOOR)]
    weight_floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Library errors stem from bad inputs: arguments, files, or their contents.
impl From<seasoncorr::Error> for CliError {
    fn from(e: seasoncorr::Error) -> Self {
        Self::usage(e.to_string())
    }
}

impl PipelineFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            profile: self.profile,
            threads: self.threads,
            visibility_tol: self.visibility_tol,
            ..Default::default()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fuse(a) => {
            let overrides = Overrides {
                pixel_stride: a.fusion.pixel_stride,
                merge_radius: a.fusion.merge_radius,
                min_views: a.fusion.min_views,
                ..a.pipeline.overrides()
            };
            let cfg = commands::resolve(&overrides, a.pipeline.config.as_deref())?;
            commands::fuse(&a.poses, &a.depth_dir, a.traversal.as_deref(), &a.out, &cfg)
        }
        Command::Match(a) => {
            let overrides = Overrides {
                kappa: a.kappa,
                min_common: a.min_common,
                max_cam_dist: a.max_cam_dist,
                condition: a.condition.clone(),
                ..a.pipeline.overrides()
            };
            let cfg = commands::resolve(&overrides, a.pipeline.config.as_deref())?;
            commands::run_match(
                &commands::MatchInputs {
                    ref_cloud: &a.ref_cloud,
                    tgt_cloud: &a.tgt_cloud,
                    poses: &a.poses,
                    out: &a.out,
                    ref_traversal: a.ref_traversal.as_deref(),
                    tgt_traversal: a.tgt_traversal.as_deref(),
                },
                &cfg,
            )
        }
        Command::Stats { manifest } => commands::stats(&manifest),
        Command::Losscheck { seed, per_combo } => commands::losscheck(seed, per_combo),
        Command::Synth(a) => commands::synth(a.seed, &a.out, a.traversals, a.views, a.sigma, a.dropout),
        Command::Eval {
            generated,
            ground_truth,
            pixel_tol,
        } => commands::eval(&generated, &ground_truth, pixel_tol),
        Command::FuseScores(a) => commands::fuse_scores(
            &a.inputs,
            (a.width, a.height),
            a.stride,
            a.center,
            a.weight_floor,
            &a.out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seasoncorr: {e}");
            ExitCode::from(e.code)
        }
    }
}
