//! Shared fixtures for the benchmarks.

use priormvs::raster::to_gray;
use priormvs::synthetic::{SceneSpec, SyntheticScene};
use priormvs::{stream_rng, GrayImage, PointCloud};
use rand::Rng;

/// Rendered two-plane scene plus grayscale copies of its images.
pub struct Fixture {
    pub scene: SyntheticScene,
    pub grays: Vec<GrayImage>,
}

pub fn fixture(views: usize) -> Fixture {
    let scene = SyntheticScene::render(SceneSpec::two_planes(views, 0)).expect("scene renders");
    let grays = scene.images.iter().map(to_gray).collect();
    Fixture { scene, grays }
}

/// Uniform points in a unit cube.
pub fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = stream_rng(seed, 0);
    let points = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    PointCloud::new(points, None).expect("finite points")
}
