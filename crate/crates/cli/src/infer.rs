//! Depth inference tree:
//!
//! ```text
//! <out>/depths/<view>.pfm        final-scale depth, 0 where invalid
//! <out>/confidence/<view>.pfm
//! <out>/uncorrected/...          same layout, compare mode only
//! <out>/report.json
//! ```

use std::path::Path;

use priormvs::io::{view_name, write_pfm_file, SceneLayout};
use priormvs::metrics::depth_error_ratio;
use priormvs::mvs::cascade_infer;
use priormvs::raster::to_gray;
use priormvs::synthesis::{multi_scale_loss, rank_neighbors};
use priormvs::{CorrectionInput, CorrectionStatus, DepthMap, GrayImage, ScaleOutput, ViewInput};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::diff::changed_fraction;
use crate::failure::{Context, Failure};
use crate::fsutil::{create_dir, write_file};

/// Relative error above which a pixel counts as wrong in the report.
const RELATIVE_ERROR_BOUND: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Correct when priors are given and the config enables it.
    Default,
    /// Never correct.
    Uncorrected,
    /// Write both, report the difference.
    Compare,
}

struct ViewResult {
    id: usize,
    sources: Vec<usize>,
    main: Vec<ScaleOutput>,
    baseline: Option<Vec<ScaleOutput>>,
    prior_missing: bool,
}

pub fn run(scene: &Path, priors: Option<&Path>, out: &Path, cfg: &PipelineConfig, mode: Mode) -> Result<Value, Failure> {
    let layout = SceneLayout::open(scene, priors).context(scene.display())?;
    let cameras = layout.load_cameras()?;
    if layout.pairs.is_none() {
        log::info!("{}: no pair.txt, ranking neighbors by camera distance", scene.display());
    }
    let images: Vec<GrayImage> = (0..layout.num_views())
        .into_par_iter()
        .map(|id| layout.load_image(id).map(|img| to_gray(&img)))
        .collect::<Result<_, _>>()?;
    let correcting = mode != Mode::Uncorrected && cfg.infer.correction && priors.is_some();
    if mode == Mode::Compare && !correcting {
        return Err(Failure::usage("compare mode needs --priors and correction enabled"));
    }

    let results: Vec<ViewResult> = (0..layout.num_views())
        .into_par_iter()
        .map(|id| -> Result<ViewResult, Failure> {
            let mut sources = rank_neighbors(id, &cameras, layout.pairs.as_ref());
            sources.truncate(cfg.infer.sources);
            if sources.is_empty() {
                return Err(Failure::other(format!("view {} has no source views", view_name(id))));
            }
            if sources.len() < cfg.infer.sources {
                log::warn!(
                    "view {}: {} of {} source views available",
                    view_name(id),
                    sources.len(),
                    cfg.infer.sources
                );
            }
            let reference = ViewInput {
                image: &images[id],
                camera: &cameras[id],
            };
            let srcs: Vec<ViewInput> = sources
                .iter()
                .map(|&j| ViewInput {
                    image: &images[j],
                    camera: &cameras[j],
                })
                .collect();
            let prior = if correcting { layout.load_prior(id)? } else { None };
            let prior_missing = correcting && prior.is_none();
            if prior_missing {
                log::warn!("view {}: no prior, running uncorrected", view_name(id));
            }
            let correction = prior.as_ref().map(|p| CorrectionInput {
                prior: p,
                tau: cfg.tau,
                fit: cfg.fit,
            });
            let main = cascade_infer(reference, &srcs, &cfg.cascade, correction.as_ref())?;
            let baseline = if mode == Mode::Compare {
                Some(cascade_infer(reference, &srcs, &cfg.cascade, None)?)
            } else {
                None
            };
            Ok(ViewResult {
                id,
                sources,
                main,
                baseline,
                prior_missing,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut views = Vec::new();
    for r in &results {
        let name = view_name(r.id);
        write_outputs(out, &name, &r.main)?;
        let gt = layout.load_gt_depth(r.id)?;
        let mut entry = view_report(r, &r.main, gt.as_ref(), cfg)?;
        if let Some(base) = &r.baseline {
            write_outputs(&out.join("uncorrected"), &name, base)?;
            let a = final_depth(&r.main);
            let b = final_depth(base);
            entry["changed_fraction"] = json!(changed_fraction(a.values(), b.values())?);
            entry["uncorrected"] = view_report(r, base, gt.as_ref(), cfg)?;
        }
        views.push(entry);
    }
    let report = json!({ "views": views });
    write_file(&out.join("report.json"), serde_json::to_string_pretty(&report).expect("json") + "\n")?;
    Ok(report)
}

fn final_depth(scales: &[ScaleOutput]) -> &DepthMap {
    scales.last().expect("at least one scale").effective_depth()
}

fn write_outputs(out: &Path, name: &str, scales: &[ScaleOutput]) -> Result<(), Failure> {
    let last = scales.last().expect("at least one scale");
    let (depth_dir, conf_dir) = (out.join("depths"), out.join("confidence"));
    create_dir(&depth_dir)?;
    create_dir(&conf_dir)?;
    write_pfm_file(&depth_dir.join(format!("{name}.pfm")), last.effective_depth().values())?;
    write_pfm_file(&conf_dir.join(format!("{name}.pfm")), last.confidence.values())?;
    Ok(())
}

fn view_report(r: &ViewResult, scales: &[ScaleOutput], gt: Option<&DepthMap>, cfg: &PipelineConfig) -> Result<Value, Failure> {
    let depth = final_depth(scales);
    let (w, h) = depth.dims();
    let corrections: Vec<Value> = scales
        .iter()
        .enumerate()
        .filter_map(|(k, s)| s.correction.as_ref().map(|c| (k, c)))
        .map(|(k, c)| match &c.status {
            CorrectionStatus::Applied { refined, invalidated } => {
                let m = c.mapping.expect("applied correction has a mapping");
                json!({"scale": k, "a": m.a, "b": m.b, "inliers": m.num_inliers, "refined": refined, "invalidated": invalidated})
            }
            CorrectionStatus::DegenerateFit(reason) => json!({"scale": k, "degenerate": reason}),
        })
        .collect();
    let mut entry = json!({
        "view": r.id,
        "sources": r.sources,
        "valid_fraction": depth.valid_count() as f64 / (w * h) as f64,
        "corrections": corrections,
    });
    if r.prior_missing {
        entry["prior_missing"] = json!(true);
    }
    if let Some(gt) = gt {
        if gt.dims() != depth.dims() {
            return Err(Failure::other(format!(
                "ground truth for view {} is {:?}, prediction is {:?}",
                r.id,
                gt.dims(),
                depth.dims()
            )));
        }
        let interval = scales.last().expect("scale").interval;
        let preds: Vec<DepthMap> = scales.iter().map(|s| s.depth.clone()).collect();
        entry["gt"] = json!({
            "bad_fraction": bad_fraction(depth, gt),
            "within_interval": depth_error_ratio(depth, gt, interval).ok(),
            "loss": multi_scale_loss(&preds, gt, &cfg.loss).ok().map(|l| l.total),
        });
    }
    Ok(entry)
}

/// Share of ground-truth pixels whose prediction is missing or off by more
/// than [`RELATIVE_ERROR_BOUND`].
pub fn bad_fraction(pred: &DepthMap, gt: &DepthMap) -> f64 {
    let (w, h) = gt.dims();
    let (mut bad, mut total) = (0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            let Some(g) = gt.get(x, y) else { continue };
            total += 1;
            match pred.get(x, y) {
                Some(p) if ((p - g).abs() as f64) <= RELATIVE_ERROR_BOUND * g as f64 => {}
                _ => bad += 1,
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}
