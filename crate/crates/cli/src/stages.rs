//! Thin wrappers: correct, fuse, eval, synthetic scene generation.

use std::path::Path;

use priormvs::io::{read_pfm_file, read_ply_file, view_name, write_pfm_file, write_ply_file, SceneLayout};
use priormvs::synthetic::{PriorStyle, SceneSpec, SyntheticScene};
use priormvs::{
    cloud_distance_metrics, correct_depth, fuse, CloudMetrics, ConfidenceMap, CorrectionOutcome, DepthMap, FusionOutput,
    FusionView, PriorMap,
};

use crate::config::PipelineConfig;
use crate::failure::{Context, Failure, EXIT_DEGENERATE_FIT};

pub fn correct(depth: &Path, confidence: &Path, prior: &Path, out: &Path, cfg: &PipelineConfig) -> Result<CorrectionOutcome, Failure> {
    let d = DepthMap::from_values(read_pfm_file(depth).context(depth.display())?);
    let c = ConfidenceMap::new(read_pfm_file(confidence).context(confidence.display())?).context(confidence.display())?;
    let p = PriorMap::new(read_pfm_file(prior).context(prior.display())?).context(prior.display())?;
    let outcome = correct_depth(&d, &c, &p, cfg.tau, &cfg.fit).context(depth.display())?;
    if let Some(reason) = outcome.degenerate_reason() {
        return Err(Failure::new(EXIT_DEGENERATE_FIT, format!("{}: {reason}", depth.display())));
    }
    write_pfm_file(out, outcome.depth.values())?;
    Ok(outcome)
}

/// Fuses `<depth_dir>/depths/<view>.pfm` with `<depth_dir>/confidence/<view>.pfm`.
/// Views without a depth file are left out; a missing confidence map counts
/// as fully confident.
pub fn fuse_dir(scene: &Path, depth_dir: &Path, out: &Path, cfg: &PipelineConfig) -> Result<FusionOutput, Failure> {
    let layout = SceneLayout::open(scene, None).context(scene.display())?;
    let mut loaded = Vec::new();
    for id in 0..layout.num_views() {
        let name = view_name(id);
        let dpath = depth_dir.join("depths").join(format!("{name}.pfm"));
        if !dpath.is_file() {
            log::warn!("view {name}: no depth map at {}, left out", dpath.display());
            continue;
        }
        let depth = DepthMap::from_values(read_pfm_file(&dpath).context(dpath.display())?);
        let cpath = depth_dir.join("confidence").join(format!("{name}.pfm"));
        let conf = if cpath.is_file() {
            ConfidenceMap::new(read_pfm_file(&cpath).context(cpath.display())?).context(cpath.display())?
        } else {
            log::warn!("view {name}: no confidence map, treating every pixel as confident");
            let (w, h) = depth.dims();
            ConfidenceMap::constant(w, h, 1.0)
        };
        loaded.push((layout.load_image(id)?, depth, conf, layout.load_camera(id)?));
    }
    if loaded.is_empty() {
        return Err(Failure::empty(format!("no depth maps in {}", depth_dir.join("depths").display())));
    }
    let views: Vec<FusionView> = loaded
        .iter()
        .map(|(image, depth, confidence, camera)| FusionView {
            image,
            depth,
            confidence,
            camera,
        })
        .collect();
    let fused = fuse(&views, &cfg.fusion)?;
    if fused.cloud.is_empty() {
        return Err(Failure::empty("fusion produced no points"));
    }
    write_ply_file(out, &fused.cloud)?;
    Ok(fused)
}

pub fn eval(recon: &Path, gt: &Path, cfg: &PipelineConfig) -> Result<CloudMetrics, Failure> {
    let r = read_ply_file(recon).context(recon.display())?;
    let g = read_ply_file(gt).context(gt.display())?;
    Ok(cloud_distance_metrics(&r, &g, cfg.eval.max_dist, cfg.eval.threshold)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SceneKind {
    /// Slanted textured background behind a smaller fronto-parallel plane.
    TwoPlanes,
    /// Two planes with an untextured patch on the background.
    FlatPatch,
    /// One textured fronto-parallel plane at depth 5.
    SinglePlane,
}

pub struct SceneOptions {
    pub views: usize,
    pub seed: u64,
    pub pairs: bool,
    pub kind: SceneKind,
    pub prior: PriorStyle,
}

/// Renders a synthetic scene with ground truth and priors in `<out>/priors`.
pub fn make_scene(out: &Path, opts: &SceneOptions) -> Result<(), Failure> {
    let spec = match opts.kind {
        SceneKind::TwoPlanes => SceneSpec::two_planes(opts.views, opts.seed),
        SceneKind::FlatPatch => SceneSpec::two_planes_with_flat_patch(opts.views, opts.seed),
        SceneKind::SinglePlane => SceneSpec::single_plane(opts.views, 5.0, opts.seed),
    };
    let scene = SyntheticScene::render(spec)?;
    scene.write(out, opts.pairs)?;
    if opts.kind == SceneKind::SinglePlane {
        // constant depth has no relative ordering to normalize
        log::warn!("single-plane scenes are written without priors");
        return Ok(());
    }
    scene.write_priors(&out.join("priors"), opts.prior)?;
    Ok(())
}
