//! Coarse-to-fine plane-sweep stereo.
//!
//! Each scale sweeps a set of per-pixel depth hypotheses, scores them by the
//! across-view variance of normalized grayscale patches, and regresses depth
//! and confidence with a soft-argmin. The coarsest scale covers the whole
//! depth range; every finer scale searches a narrower window centered on the
//! (optionally prior-corrected) estimate from the scale before.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correction::{correct_depth, CorrectionOutcome, FitConfig};
use crate::error::{Error, Result};
use crate::geometry::{apply_homography, CameraView, PlaneSweepHomography};
use crate::prior::PriorMap;
use crate::raster::{downsample2, sample_bilinear, ConfidenceMap, DepthMap, GrayImage, Grid};

/// Patches whose intensity standard deviation is below this are treated as
/// textureless and normalize to zero.
pub const TEXTURE_EPS: f64 = 1e-2;

/// Hypotheses counted around the regressed depth for confidence.
pub const CONFIDENCE_BINS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub num_scales: usize,
    /// Coarsest first.
    pub hypotheses_per_scale: Vec<usize>,
    /// Hypothesis spacing per scale, in base intervals. The base interval is
    /// the depth range divided by `hypotheses[0] · ratio[0]`.
    pub interval_ratio_per_scale: Vec<f64>,
    /// Matching window half-size in pixels.
    pub window_radius: usize,
    /// Apply prior correction to a scale's output before the next scale uses it.
    pub correction_enabled_per_scale: Vec<bool>,
    /// Soft-argmin temperature on per-pixel min-max normalized costs.
    pub temperature: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            num_scales: 3,
            hypotheses_per_scale: vec![48, 32, 8],
            interval_ratio_per_scale: vec![4.0, 2.0, 1.0],
            window_radius: 1,
            correction_enabled_per_scale: vec![true, false, false],
            temperature: 0.02,
        }
    }
}

impl CascadeConfig {
    /// Single plane sweep over the full range.
    pub fn single_scale(hypotheses: usize) -> Self {
        Self {
            num_scales: 1,
            hypotheses_per_scale: vec![hypotheses],
            interval_ratio_per_scale: vec![1.0],
            correction_enabled_per_scale: vec![false],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.num_scales;
        if s == 0 {
            return Err(Error::InvalidArgument("num_scales must be at least 1".into()));
        }
        let lens = [
            self.hypotheses_per_scale.len(),
            self.interval_ratio_per_scale.len(),
            self.correction_enabled_per_scale.len(),
        ];
        if lens.iter().any(|&l| l != s) {
            return Err(Error::InvalidArgument(format!(
                "per-scale lists must have num_scales = {s} entries, got {lens:?}"
            )));
        }
        if self.hypotheses_per_scale.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArgument("every scale needs at least 2 hypotheses".into()));
        }
        if self.interval_ratio_per_scale.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidArgument("interval ratios must be positive".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidArgument("temperature must be positive".into()));
        }
        Ok(())
    }

    /// Base hypothesis interval for a depth range.
    pub fn base_interval(&self, depth_min: f64, depth_max: f64) -> f64 {
        (depth_max - depth_min) / (self.hypotheses_per_scale[0] as f64 * self.interval_ratio_per_scale[0])
    }

    /// Hypothesis spacing at `scale` (0 = coarsest).
    pub fn interval(&self, scale: usize, depth_min: f64, depth_max: f64) -> f64 {
        self.interval_ratio_per_scale[scale] * self.base_interval(depth_min, depth_max)
    }
}

/// Per-pixel depth candidates, `count` per pixel, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisVolume {
    width: usize,
    height: usize,
    count: usize,
    depths: Vec<f64>,
}

/// `count` depths from `d_min` to `d_max`, uniform in inverse depth, ascending.
pub fn inverse_depth_samples(d_min: f64, d_max: f64, count: usize) -> Vec<f64> {
    let (inv_near, inv_far) = (1.0 / d_min, 1.0 / d_max);
    let last = (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i == 0 {
                d_min
            } else if i == count - 1 {
                d_max
            } else {
                let t = i as f64 / last;
                (1.0 / (inv_near + t * (inv_far - inv_near))).clamp(d_min, d_max)
            }
        })
        .collect()
}

/// `count` depths spaced by `interval` and centered on `center`, shifted to
/// stay inside [d_min, d_max]. The result always brackets the clamped center.
pub fn window_samples(center: f64, interval: f64, count: usize, d_min: f64, d_max: f64) -> Vec<f64> {
    let c = center.clamp(d_min, d_max);
    let span = (count - 1) as f64 * interval;
    if span >= d_max - d_min {
        let step = (d_max - d_min) / (count - 1) as f64;
        return (0..count)
            .map(|i| if i == count - 1 { d_max } else { d_min + i as f64 * step })
            .collect();
    }
    let lo = (c - 0.5 * span).min(d_max - span).max(d_min);
    let mut out: Vec<f64> = (0..count).map(|i| (lo + i as f64 * interval).min(d_max)).collect();
    // guard against last-ulp rounding at either end
    out[0] = out[0].min(c);
    out[count - 1] = out[count - 1].max(c);
    out
}

impl HypothesisVolume {
    pub fn new(width: usize, height: usize, count: usize, depths: Vec<f64>) -> Result<Self> {
        if count < 2 || depths.len() != width * height * count {
            return Err(Error::InvalidArgument(format!(
                "hypothesis volume {width}x{height}x{count} needs {} depths, got {}",
                width * height * count,
                depths.len()
            )));
        }
        Ok(Self {
            width,
            height,
            count,
            depths,
        })
    }

    /// The same hypotheses at every pixel.
    pub fn broadcast(width: usize, height: usize, hypotheses: &[f64]) -> Result<Self> {
        let depths = hypotheses.repeat(width * height);
        Self::new(width, height, hypotheses.len(), depths)
    }

    /// Full-range sweep, uniform in inverse depth.
    pub fn full_range(width: usize, height: usize, count: usize, d_min: f64, d_max: f64) -> Result<Self> {
        Self::broadcast(width, height, &inverse_depth_samples(d_min, d_max, count))
    }

    /// Windows centered on `centers`; pixels without a center get a full-range
    /// sweep.
    pub fn around(
        centers: &Grid<Option<f64>>,
        count: usize,
        interval: f64,
        d_min: f64,
        d_max: f64,
    ) -> Result<Self> {
        let fallback = inverse_depth_samples(d_min, d_max, count);
        let mut depths = Vec::with_capacity(centers.len() * count);
        for c in centers.as_slice() {
            match c {
                Some(c) => depths.extend(window_samples(*c, interval, count, d_min, d_max)),
                None => depths.extend_from_slice(&fallback),
            }
        }
        Self::new(centers.width(), centers.height(), count, depths)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.count;
        &self.depths[i..i + self.count]
    }

    fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.depths.chunks(self.width * self.count)
    }
}

/// Matching cost per pixel and hypothesis; `+∞` where no source was usable.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    count: usize,
    costs: Vec<f64>,
}

impl CostVolume {
    pub fn new(width: usize, height: usize, count: usize, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != width * height * count || count == 0 {
            return Err(Error::InvalidArgument(format!(
                "cost volume {width}x{height}x{count} needs {} costs, got {}",
                width * height * count,
                costs.len()
            )));
        }
        Ok(Self {
            width,
            height,
            count,
            costs,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.count;
        &self.costs[i..i + self.count]
    }
}

/// A grayscale image with its camera.
#[derive(Debug, Clone, Copy)]
pub struct ViewInput<'a> {
    pub image: &'a GrayImage,
    pub camera: &'a CameraView,
}

/// Zero-mean, unit-variance patch; all zeros when textureless.
fn normalize_patch(patch: &mut [f64]) {
    let n = patch.len() as f64;
    let mean = patch.iter().sum::<f64>() / n;
    let var = patch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < TEXTURE_EPS {
        patch.iter_mut().for_each(|v| *v = 0.0);
    } else {
        patch.iter_mut().for_each(|v| *v = (*v - mean) / std);
    }
}

fn window_offsets(radius: usize) -> Vec<(f64, f64)> {
    let r = radius as i64;
    (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx as f64, dy as f64)))
        .collect()
}

/// Plane-sweep cost volume.
///
/// For each pixel and hypothesis, every source is warped onto the reference
/// by the fronto-parallel homography at that depth and a (2r+1)² patch is
/// sampled. Patches are normalized to zero mean and unit variance, and the
/// cost is the across-view variance (reference included) averaged over the
/// window. A source is excluded when the warped patch center leaves its image
/// (window samples past the border are clamped, as for the reference); with
/// no usable source the cost is `+∞`.
pub fn build_cost_volume(
    reference: ViewInput<'_>,
    sources: &[ViewInput<'_>],
    hypotheses: &HypothesisVolume,
    window_radius: usize,
) -> Result<CostVolume> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("cost volume needs at least one source view".into()));
    }
    let (w, h) = reference.image.dims();
    if reference.camera.image_size() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: reference.camera.image_size(),
            actual: (w, h),
        });
    }
    for s in sources {
        if s.camera.image_size() != s.image.dims() {
            return Err(Error::DimensionMismatch {
                expected: s.camera.image_size(),
                actual: s.image.dims(),
            });
        }
    }
    if hypotheses.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            actual: hypotheses.dims(),
        });
    }
    let (d_min, d_max) = (reference.camera.depth_min(), reference.camera.depth_max());
    if let Some(bad) = hypotheses.depths.iter().find(|d| !(**d >= d_min && **d <= d_max)) {
        return Err(Error::InvalidArgument(format!(
            "hypothesis {bad} outside depth range [{d_min}, {d_max}]"
        )));
    }

    let offsets = window_offsets(window_radius);
    let n = offsets.len();
    let homographies: Vec<PlaneSweepHomography> = sources
        .iter()
        .map(|s| PlaneSweepHomography::new(reference.camera, s.camera))
        .collect();
    let count = hypotheses.count();
    let (max_u, max_v) = ((w - 1) as f64, (h - 1) as f64);

    let rows: Vec<Vec<f64>> = hypotheses
        .rows()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(y, row_hyps)| {
            let mut out = Vec::with_capacity(w * count);
            let mut ref_patch = vec![0.0; n];
            let mut coords = vec![(0.0, 0.0); n];
            let mut patch = vec![0.0; n];
            let mut s1 = vec![0.0; n];
            let mut s2 = vec![0.0; n];
            for x in 0..w {
                // border-replicated window, shared by the reference and the warps
                for ((p, c), (dx, dy)) in ref_patch.iter_mut().zip(coords.iter_mut()).zip(&offsets) {
                    *c = ((x as f64 + dx).clamp(0.0, max_u), (y as f64 + dy).clamp(0.0, max_v));
                    *p = *reference.image.get(c.0 as usize, c.1 as usize) as f64;
                }
                normalize_patch(&mut ref_patch);
                for &d in &row_hyps[x * count..(x + 1) * count] {
                    s1.copy_from_slice(&ref_patch);
                    for (a, r) in s2.iter_mut().zip(&ref_patch) {
                        *a = r * r;
                    }
                    let mut views = 1usize;
                    for (src, hom) in sources.iter().zip(&homographies) {
                        let hm = hom.at_depth(d);
                        let inside = apply_homography(&hm, x as f64, y as f64)
                            .and_then(|q| sample_bilinear(src.image, q.u, q.v))
                            .is_some();
                        if !inside {
                            continue;
                        }
                        let (su, sv) = ((src.image.width() - 1) as f64, (src.image.height() - 1) as f64);
                        let ok = coords.iter().zip(patch.iter_mut()).all(|(&(u, v), p)| {
                            apply_homography(&hm, u, v)
                                .and_then(|q| sample_bilinear(src.image, q.u.clamp(0.0, su), q.v.clamp(0.0, sv)))
                                .map(|v| *p = v as f64)
                                .is_some()
                        });
                        if !ok {
                            continue;
                        }
                        normalize_patch(&mut patch);
                        for ((a, b), p) in s1.iter_mut().zip(s2.iter_mut()).zip(&patch) {
                            *a += p;
                            *b += p * p;
                        }
                        views += 1;
                    }
                    if views < 2 {
                        out.push(f64::INFINITY);
                        continue;
                    }
                    let k = views as f64;
                    let var: f64 = s1
                        .iter()
                        .zip(&s2)
                        .map(|(a, b)| (b / k - (a / k) * (a / k)).max(0.0))
                        .sum();
                    out.push(var / n as f64);
                }
            }
            out
        })
        .collect();
    CostVolume::new(w, h, count, rows.concat())
}

/// Depth and confidence from one pixel's costs; `None` when every cost is infinite.
pub fn regress_pixel(costs: &[f64], hypotheses: &[f64], temperature: f64) -> Option<(f64, f64)> {
    let finite = costs.iter().copied().filter(|c| c.is_finite());
    let (lo, hi) = finite.fold(None, |acc: Option<(f64, f64)>, c| match acc {
        None => Some((c, c)),
        Some((lo, hi)) => Some((lo.min(c), hi.max(c))),
    })?;
    let spread = hi - lo;
    let weights: Vec<f64> = costs
        .iter()
        .map(|&c| {
            if !c.is_finite() {
                0.0
            } else {
                let norm = if spread > 0.0 { (c - lo) / spread } else { 0.0 };
                (-norm / temperature).exp()
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let depth = weights.iter().zip(hypotheses).map(|(w, d)| w * d).sum::<f64>() / total;
    // the CONFIDENCE_BINS hypotheses nearest the estimate (ties: lower index)
    let mut order: Vec<usize> = (0..hypotheses.len()).collect();
    order.sort_by(|&a, &b| {
        (hypotheses[a] - depth)
            .abs()
            .total_cmp(&(hypotheses[b] - depth).abs())
            .then(a.cmp(&b))
    });
    let mass: f64 = order.iter().take(CONFIDENCE_BINS).map(|&i| weights[i]).sum::<f64>() / total;
    Some((depth, mass.clamp(0.0, 1.0)))
}

/// Soft-argmin regression over a cost volume. Pixels whose costs are all
/// infinite come out invalid with zero confidence.
pub fn regress_depth(
    cost: &CostVolume,
    hypotheses: &HypothesisVolume,
    temperature: f64,
) -> Result<(DepthMap, ConfidenceMap)> {
    if cost.dims() != hypotheses.dims() || cost.count() != hypotheses.count() {
        return Err(Error::InvalidArgument("cost and hypothesis volumes differ in shape".into()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidArgument("temperature must be positive".into()));
    }
    let (w, h) = cost.dims();
    let rows: Vec<Vec<Option<(f64, f64)>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| regress_pixel(cost.at(x, y), hypotheses.at(x, y), temperature))
                .collect()
        })
        .collect();
    let flat: Vec<Option<(f64, f64)>> = rows.concat();
    let mut depth = DepthMap::empty(w, h);
    let mut conf = Grid::filled(w, h, 0.0f32);
    for (i, r) in flat.iter().enumerate() {
        if let Some((d, c)) = r {
            let (x, y) = (i % w, i / w);
            depth.set(x, y, *d as f32);
            conf.set(x, y, *c as f32);
        }
    }
    Ok((depth, ConfidenceMap::new(conf)?))
}

/// Bilinear upsampling of a coarser estimate onto a `width × height` grid,
/// falling back to the nearest coarse pixel when a bilinear corner is invalid.
pub fn upsample_depth(depth: &DepthMap, width: usize, height: usize) -> Grid<Option<f64>> {
    let (cw, ch) = depth.dims();
    let sx = cw as f64 / width as f64;
    let sy = ch as f64 / height as f64;
    let (max_u, max_v) = ((cw - 1) as f64, (ch - 1) as f64);
    Grid::from_fn(width, height, |x, y| {
        let u = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_u);
        let v = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_v);
        depth
            .sample_bilinear(u, v)
            .or_else(|| depth.get(u.round() as usize, v.round() as usize))
            .map(|d| d as f64)
    })
}

/// Prior and parameters for correction inside the cascade.
#[derive(Debug, Clone, Copy)]
pub struct CorrectionInput<'a> {
    pub prior: &'a PriorMap,
    pub tau: f32,
    pub fit: FitConfig,
}

/// Output of one cascade scale.
#[derive(Debug, Clone)]
pub struct ScaleOutput {
    pub depth: DepthMap,
    pub confidence: ConfidenceMap,
    /// Present when correction ran at this scale.
    pub correction: Option<CorrectionOutcome>,
    /// Reference camera at this scale's resolution.
    pub camera: CameraView,
    pub interval: f64,
}

impl ScaleOutput {
    /// The estimate handed to the next scale.
    pub fn effective_depth(&self) -> &DepthMap {
        self.correction.as_ref().map_or(&self.depth, |c| &c.depth)
    }
}

struct Pyramid {
    images: Vec<GrayImage>,
    cameras: Vec<CameraView>,
}

/// Coarsest level first.
fn pyramid(view: ViewInput<'_>, levels: usize) -> Result<Pyramid> {
    let mut images = vec![view.image.clone()];
    for _ in 1..levels {
        let next = downsample2(images.last().expect("non-empty"));
        if next.width() < 1 || next.height() < 1 {
            return Err(Error::InvalidArgument(format!(
                "{}x{} image is too small for {levels} scales",
                view.image.width(),
                view.image.height()
            )));
        }
        images.push(next);
    }
    images.reverse();
    let cameras = images
        .iter()
        .enumerate()
        .map(|(k, img)| {
            let scale = 0.5f64.powi((levels - 1 - k) as i32);
            view.camera.scaled(scale, img.width(), img.height())
        })
        .collect();
    Ok(Pyramid { images, cameras })
}

/// Coarse-to-fine inference for one reference view.
pub fn cascade_infer(
    reference: ViewInput<'_>,
    sources: &[ViewInput<'_>],
    cfg: &CascadeConfig,
    correction: Option<&CorrectionInput<'_>>,
) -> Result<Vec<ScaleOutput>> {
    cascade_infer_with(reference, sources, cfg, correction, |_, _, _| {})
}

/// [`cascade_infer`] with a hook that may edit each scale's raw estimate
/// before correction and before the next scale consumes it.
pub fn cascade_infer_with(
    reference: ViewInput<'_>,
    sources: &[ViewInput<'_>],
    cfg: &CascadeConfig,
    correction: Option<&CorrectionInput<'_>>,
    mut hook: impl FnMut(usize, &mut DepthMap, &mut ConfidenceMap),
) -> Result<Vec<ScaleOutput>> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::InvalidArgument("inference needs at least one source view".into()));
    }
    if reference.camera.image_size() != reference.image.dims() {
        return Err(Error::DimensionMismatch {
            expected: reference.camera.image_size(),
            actual: reference.image.dims(),
        });
    }
    let s = cfg.num_scales;
    let ref_pyr = pyramid(reference, s)?;
    let src_pyr: Vec<Pyramid> = sources.iter().map(|v| pyramid(*v, s)).collect::<Result<_>>()?;
    let (d_min, d_max) = (reference.camera.depth_min(), reference.camera.depth_max());

    let mut outputs: Vec<ScaleOutput> = Vec::with_capacity(s);
    for k in 0..s {
        let (w, h) = ref_pyr.images[k].dims();
        let count = cfg.hypotheses_per_scale[k];
        let interval = cfg.interval(k, d_min, d_max);
        let hyps = match outputs.last() {
            None => HypothesisVolume::full_range(w, h, count, d_min, d_max)?,
            Some(prev) => {
                let centers = upsample_depth(prev.effective_depth(), w, h);
                HypothesisVolume::around(&centers, count, interval, d_min, d_max)?
            }
        };
        let ref_view = ViewInput {
            image: &ref_pyr.images[k],
            camera: &ref_pyr.cameras[k],
        };
        let src_views: Vec<ViewInput<'_>> = src_pyr
            .iter()
            .map(|p| ViewInput {
                image: &p.images[k],
                camera: &p.cameras[k],
            })
            .collect();
        let cost = build_cost_volume(ref_view, &src_views, &hyps, cfg.window_radius)?;
        let (mut depth, mut confidence) = regress_depth(&cost, &hyps, cfg.temperature)?;
        hook(k, &mut depth, &mut confidence);
        let corrected = match correction {
            Some(c) if cfg.correction_enabled_per_scale[k] => {
                let out = correct_depth(&depth, &confidence, c.prior, c.tau, &c.fit)?;
                if let Some(reason) = out.degenerate_reason() {
                    log::warn!("scale {k}: correction skipped, {reason}");
                }
                Some(out)
            }
            _ => None,
        };
        outputs.push(ScaleOutput {
            depth,
            confidence,
            correction: corrected,
            camera: ref_pyr.cameras[k].clone(),
            interval,
        });
    }
    Ok(outputs)
}
