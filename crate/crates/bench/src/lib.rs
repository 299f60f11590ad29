//! Shared fixtures for the benchmarks.

use dnd_core::optim::{DepthVariable, FrameBundle};
use dnd_core::synth::{build_bundle, generate_scene, lognormal_noise, BundleOptions, SceneConfig};

/// Frame 1 of a synthetic scene with noisy depth for the target and both neighbours.
pub struct Fixture {
    pub bundle: FrameBundle,
    pub target: DepthVariable,
    pub neighbors: Vec<DepthVariable>,
}

impl Fixture {
    pub fn new(width: usize, height: usize) -> Self {
        let scene = generate_scene(&SceneConfig::with_resolution(width, height)).expect("scene");
        let bundle = build_bundle(&scene, 1, &BundleOptions::default()).expect("bundle");
        let noisy = |d: &Option<_>, seed| DepthVariable::from_depth(&lognormal_noise(d.as_ref().expect("gt"), 0.3, seed).expect("noise"));
        let target = noisy(&bundle.target.ground_truth, 1);
        let neighbors = bundle.neighbors.iter().zip(2..).map(|(nb, s)| noisy(&nb.frame.ground_truth, s)).collect();
        Self { bundle, target, neighbors }
    }
}
