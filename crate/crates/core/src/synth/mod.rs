//! Deterministic synthetic street scenes with known correspondences, used to
//! check the matching pipeline end to end.

mod eval;
pub mod rng;
mod scene;

pub use eval::{evaluate_against, evaluate_correspondences, EvalReport, DEFAULT_PIXEL_TOL};
pub use scene::{
    class, generate_scene, street_surfaces, GeneratedScene, Shape, Surface, SurfaceSample, SynthConfig, SyntheticScene,
    Traversal,
};
