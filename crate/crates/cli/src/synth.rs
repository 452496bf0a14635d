//! Pseudo-supervised sample tree:
//!
//! ```text
//! <out>/<view>/reference.png
//! <out>/<view>/reference_cam.txt
//! <out>/<view>/depth.pfm            supervision depth
//! <out>/<view>/source_<k>.png        reference splatted into neighbor pose k
//! <out>/<view>/source_<k>_mask.png   0 empty, 128 hole-filled, 255 splatted
//! <out>/<view>/source_<k>_cam.txt
//! <out>/<view>/sample.json           source ids and perturbation
//! ```

use std::path::Path;

use priormvs::io::cam::DEFAULT_DEPTH_NUM;
use priormvs::io::image::write_png_gray;
use priormvs::io::{view_name, write_cam, write_pfm_file, write_png, CamFile, SceneLayout};
use priormvs::synthesis::build_training_sample;
use priormvs::{stream_rng, Error, TrainingSample};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::failure::{Context, Failure};
use crate::fsutil::{create_dir, write_file};

pub struct SynthSummary {
    pub written: Vec<usize>,
    pub skipped: Vec<usize>,
}

pub fn run(scene: &Path, priors: &Path, out: &Path, cfg: &PipelineConfig) -> Result<SynthSummary, Failure> {
    let layout = SceneLayout::open(scene, Some(priors)).context(scene.display())?;
    let cameras = layout.load_cameras()?;
    if layout.pairs.is_none() {
        log::info!("{}: no pair.txt, ranking neighbors by camera distance", scene.display());
    }
    let ids: Vec<usize> = (0..layout.num_views()).collect();
    let results: Vec<Result<Option<TrainingSample>, Error>> = ids
        .par_iter()
        .map(|&id| {
            let Some(prior) = layout.load_prior(id)? else {
                return Ok(None);
            };
            let image = layout.load_image(id)?;
            // one stream per view keeps samples independent of scheduling
            let mut rng = stream_rng(cfg.seed, id as u64);
            build_training_sample(&image, &prior, id, &cameras, layout.pairs.as_ref(), &cfg.synth, &mut rng).map(Some)
        })
        .collect();

    let mut deficient = Vec::new();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(Some(s)) => samples.push(s),
            Ok(None) => {
                log::warn!("view {}: no prior, skipped", view_name(*id));
                skipped.push(*id);
            }
            Err(Error::NotEnoughViews { view, available, .. }) => deficient.push(format!("{} ({available})", view_name(view))),
            Err(e) => return Err(Failure::from(e).context(format!("view {}", view_name(*id)))),
        }
    }
    if !deficient.is_empty() {
        return Err(Failure::other(format!(
            "{} source views requested but these views have fewer candidate neighbors: {}",
            cfg.synth.num_views,
            deficient.join(", ")
        )));
    }
    if samples.is_empty() {
        return Err(Failure::empty(format!("no samples written: no priors found in {}", priors.display())));
    }
    create_dir(out)?;
    let written = samples.iter().map(|s| s.reference_id).collect();
    for s in &samples {
        write_sample(&out.join(view_name(s.reference_id)), s)?;
    }
    Ok(SynthSummary { written, skipped })
}

fn write_sample(dir: &Path, s: &TrainingSample) -> Result<(), Failure> {
    create_dir(dir)?;
    write_png(&dir.join("reference.png"), &s.reference_image)?;
    let cam = |v| write_cam(&CamFile::from_view(v, DEFAULT_DEPTH_NUM));
    write_file(&dir.join("reference_cam.txt"), cam(&s.reference_view))?;
    write_pfm_file(&dir.join("depth.pfm"), s.supervision_depth.values())?;
    for (k, (warp, view)) in s.source_images.iter().zip(&s.source_views).enumerate() {
        write_png(&dir.join(format!("source_{k}.png")), &warp.image)?;
        write_png_gray(&dir.join(format!("source_{k}_mask.png")), &warp.mask.map(|m| m.to_byte()))?;
        write_file(&dir.join(format!("source_{k}_cam.txt")), cam(view))?;
    }
    let meta = serde_json::json!({
        "reference": s.reference_id,
        "sources": s.source_ids,
        "perturbation": {
            "eta1": s.perturbation.eta1,
            "eta2": s.perturbation.eta2,
            "eta3": s.perturbation.eta3,
        },
    });
    let text = serde_json::to_string_pretty(&meta).expect("json") + "\n";
    write_file(&dir.join("sample.json"), text)
}
