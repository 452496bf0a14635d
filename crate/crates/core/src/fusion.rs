//! Depth-map filtering and fusion into a point cloud.
//!
//! A reference pixel survives when its confidence clears `conf_threshold` and
//! enough views agree with its depth under a forward-backward reprojection
//! check. Survivors are lifted with the average of the reference depth and the
//! depths re-estimated from each agreeing view, so every fused point projects
//! back onto its source pixel.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{reproject, unproject, CameraView, Pixel};
use crate::raster::{ConfidenceMap, DepthMap, Grid, RgbImage};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>, colors: Option<Vec<[u8; 3]>>) -> Result<Self> {
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("point coordinates must be finite".into()));
        }
        if let Some(c) = &colors {
            if c.len() != points.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} colors for {} points",
                    c.len(),
                    points.len()
                )));
            }
        }
        Ok(Self { points, colors })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub conf_threshold: f32,
    /// Forward-backward reprojection error bound, pixels.
    pub reproj_px_threshold: f64,
    /// Bound on |d' − d| / d.
    pub relative_depth_threshold: f64,
    /// Views (reference included) that must agree on a pixel.
    pub min_consistent_views: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.5,
            reproj_px_threshold: 1.0,
            relative_depth_threshold: 0.01,
            min_consistent_views: 3,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.conf_threshold > 0.0 && self.reproj_px_threshold > 0.0 && self.relative_depth_threshold > 0.0) {
            return Err(Error::InvalidArgument("fusion thresholds must be positive".into()));
        }
        if self.min_consistent_views < 1 {
            return Err(Error::InvalidArgument("min_consistent_views must be at least 1".into()));
        }
        Ok(())
    }
}

/// Depth of reference pixel `(pixel, depth)` as re-estimated through `view`,
/// if the round trip passes both thresholds.
fn check_view(
    pixel: Pixel,
    depth: f64,
    reference: &CameraView,
    view: (&DepthMap, &CameraView),
    cfg: &FusionConfig,
) -> Option<f64> {
    let (other_depth, other_cam) = view;
    let (p, _) = reproject(pixel, depth, reference, other_cam).ok()?;
    let sampled = other_depth.sample_inverse_bilinear(p.u, p.v)?;
    let (back, back_depth) = reproject(p, sampled, other_cam, reference).ok()?;
    let ok = back.distance(&pixel) < cfg.reproj_px_threshold
        && ((back_depth - depth) / depth).abs() < cfg.relative_depth_threshold;
    ok.then_some(back_depth)
}

/// Per-pixel consistency counts and averaged depths for one reference view.
struct Consistency {
    counts: Grid<u32>,
    averaged: Grid<f64>,
}

fn consistency(
    ref_depth: &DepthMap,
    ref_cam: &CameraView,
    others: &[(&DepthMap, &CameraView)],
    cfg: &FusionConfig,
) -> Consistency {
    let (w, h) = ref_depth.dims();
    let rows: Vec<Vec<(u32, f64)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let Some(d) = ref_depth.get(x, y) else {
                        return (0, 0.0);
                    };
                    let d = d as f64;
                    let pixel = Pixel::new(x as f64, y as f64);
                    let (mut count, mut sum) = (1u32, d);
                    for &view in others {
                        if let Some(back) = check_view(pixel, d, ref_cam, view, cfg) {
                            count += 1;
                            sum += back;
                        }
                    }
                    (count, sum / count as f64)
                })
                .collect()
        })
        .collect();
    let flat: Vec<(u32, f64)> = rows.into_iter().flatten().collect();
    Consistency {
        counts: Grid::from_vec(w, h, flat.iter().map(|c| c.0).collect()).expect("row sizes"),
        averaged: Grid::from_vec(w, h, flat.iter().map(|c| c.1).collect()).expect("row sizes"),
    }
}

/// Number of views (the reference itself included) that agree with each
/// reference pixel's depth; 0 for invalid pixels.
pub fn geometric_consistency(
    ref_depth: &DepthMap,
    ref_cam: &CameraView,
    others: &[(&DepthMap, &CameraView)],
    cfg: &FusionConfig,
) -> Grid<u32> {
    consistency(ref_depth, ref_cam, others, cfg).counts
}

#[derive(Debug, Clone, Copy)]
pub struct FusionView<'a> {
    pub image: &'a RgbImage,
    pub depth: &'a DepthMap,
    pub confidence: &'a ConfidenceMap,
    pub camera: &'a CameraView,
}

#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub cloud: PointCloud,
    /// Points contributed by each view, in view order.
    pub points_per_view: Vec<usize>,
    pub warnings: Vec<String>,
}

fn to_u8(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Filters every view against all others and merges the survivors, ordered by
/// view and then row-major pixel order.
pub fn fuse(views: &[FusionView<'_>], cfg: &FusionConfig) -> Result<FusionOutput> {
    cfg.validate()?;
    if views.len() < cfg.min_consistent_views {
        return Err(Error::InvalidArgument(format!(
            "{} views cannot satisfy min_consistent_views = {}",
            views.len(),
            cfg.min_consistent_views
        )));
    }
    for v in views {
        let size = v.depth.dims();
        if v.confidence.dims() != size || v.image.dims() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                actual: if v.confidence.dims() != size {
                    v.confidence.dims()
                } else {
                    v.image.dims()
                },
            });
        }
    }
    let per_view: Vec<Vec<([f64; 3], [u8; 3])>> = views
        .par_iter()
        .enumerate()
        .map(|(i, view)| {
            let others: Vec<(&DepthMap, &CameraView)> = views
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| (v.depth, v.camera))
                .collect();
            let cons = consistency(view.depth, view.camera, &others, cfg);
            let (w, h) = view.depth.dims();
            let mut out = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    if !view.depth.is_valid(x, y)
                        || view.confidence.get(x, y) <= cfg.conf_threshold
                        || (*cons.counts.get(x, y) as usize) < cfg.min_consistent_views
                    {
                        continue;
                    }
                    let d = *cons.averaged.get(x, y);
                    let Ok(p) = unproject(Pixel::new(x as f64, y as f64), d, view.camera) else {
                        continue;
                    };
                    let c = view.image.get(x, y);
                    out.push(([p.x, p.y, p.z], [to_u8(c[0]), to_u8(c[1]), to_u8(c[2])]));
                }
            }
            out
        })
        .collect();
    let points_per_view = per_view.iter().map(Vec::len).collect();
    let (points, colors): (Vec<_>, Vec<_>) = per_view.into_iter().flatten().unzip();
    let mut warnings = Vec::new();
    if points.is_empty() {
        warnings.push("fusion produced an empty point cloud".to_string());
        log::warn!("fusion produced an empty point cloud");
    }
    Ok(FusionOutput {
        cloud: PointCloud::new(points, Some(colors))?,
        points_per_view,
        warnings,
    })
}

/// World point of a pixel at the given depth, as a plain array.
pub fn lift(pixel: Pixel, depth: f64, cam: &CameraView) -> Result<[f64; 3]> {
    let p: Vector3<f64> = unproject(pixel, depth, cam)?;
    Ok([p.x, p.y, p.z])
}
