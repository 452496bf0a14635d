//! Prior-guided correction of low-confidence depth.
//!
//! Confident pixels of a depth estimate anchor a global affine relation
//! `1/depth = a·prior + b`; pixels below the confidence threshold are then
//! replaced by the depth implied by the prior through that relation.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pixel;
use crate::prior::PriorMap;
use crate::raster::{ConfidenceMap, DepthMap, Grid};
use crate::rng::stream_rng;

/// Denominators at or below this invalidate the refined pixel.
pub const MIN_INVERSE_DEPTH: f64 = 1e-12;
/// Prior variance over the inliers below this makes the fit degenerate.
pub const MIN_PRIOR_VARIANCE: f64 = 1e-12;

/// Binarized confidence: `true` where the estimate is trusted.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMask {
    values: Grid<bool>,
}

impl ConfidenceMask {
    pub fn from_grid(values: Grid<bool>) -> Self {
        Self { values }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        *self.values.get(x, y)
    }

    pub fn values(&self) -> &Grid<bool> {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.as_slice().iter().filter(|&&m| m).count()
    }
}

/// `mask(x) = conf(x) > tau`, strictly.
pub fn confidence_mask(conf: &ConfidenceMap, tau: f32) -> ConfidenceMask {
    ConfidenceMask {
        values: conf.values().map(|&c| c > tau),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Fewest usable masked pixels for a fit.
    pub min_inliers: usize,
    /// Inlier sets larger than this are uniformly subsampled to this size.
    pub max_samples: usize,
    /// Seed for the subsampling stream.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            min_inliers: 100,
            max_samples: 100_000,
            seed: 0,
        }
    }
}

/// Fitted `1/depth = a·prior + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMapping {
    pub a: f64,
    pub b: f64,
    pub num_inliers: usize,
    pub residual_rms: f64,
}

impl AffineMapping {
    /// Depth implied by a prior value, or `None` when the denominator is not positive.
    #[inline]
    pub fn depth_for(&self, prior: f64) -> Option<f64> {
        let inv = self.a * prior + self.b;
        if inv > MIN_INVERSE_DEPTH {
            Some(1.0 / inv)
        } else {
            None
        }
    }
}

/// Ordinary least squares of `y` on `x`; samples are reduced in slice order.
pub fn fit_affine(samples: &[(f64, f64)]) -> Result<AffineMapping> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!("{n} samples, need at least 2")));
    }
    let nf = n as f64;
    let (sx, sy) = samples
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    let (mx, my) = (sx / nf, sy / nf);
    let (sxx, sxy) = samples.iter().fold((0.0, 0.0), |(sxx, sxy), &(x, y)| {
        let dx = x - mx;
        (sxx + dx * dx, sxy + dx * (y - my))
    });
    if !(sxx / nf >= MIN_PRIOR_VARIANCE) {
        return Err(Error::DegenerateFit(format!(
            "prior variance {:e} over {n} inliers is below {MIN_PRIOR_VARIANCE:e}",
            sxx / nf
        )));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let sse: f64 = samples
        .iter()
        .map(|&(x, y)| {
            let r = y - (a * x + b);
            r * r
        })
        .sum();
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::DegenerateFit("non-finite coefficients".into()));
    }
    Ok(AffineMapping {
        a,
        b,
        num_inliers: n,
        residual_rms: (sse / nf).sqrt(),
    })
}

fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Fits the prior-to-inverse-depth relation over masked pixels with valid depth.
pub fn fit_mapping(
    depth: &DepthMap,
    prior: &PriorMap,
    mask: &ConfidenceMask,
    cfg: &FitConfig,
) -> Result<AffineMapping> {
    check_dims(depth.dims(), prior.dims())?;
    check_dims(depth.dims(), mask.dims())?;
    let (w, h) = depth.dims();
    let mut samples = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            if let Some(d) = depth.get(x, y) {
                samples.push((prior.get(x, y) as f64, 1.0 / d as f64));
            }
        }
    }
    if samples.len() < cfg.min_inliers.max(2) {
        return Err(Error::DegenerateFit(format!(
            "{} usable confident pixels, need {}",
            samples.len(),
            cfg.min_inliers.max(2)
        )));
    }
    if samples.len() > cfg.max_samples && cfg.max_samples >= 2 {
        let mut rng = stream_rng(cfg.seed, 0);
        let mut picked = index::sample(&mut rng, samples.len(), cfg.max_samples).into_vec();
        picked.sort_unstable();
        samples = picked.into_iter().map(|i| samples[i]).collect();
    }
    fit_affine(&samples)
}

/// Depth from the prior on mask-0 pixels; mask-1 pixels stay invalid in the output.
pub fn refine_low_confidence(
    prior: &PriorMap,
    mask: &ConfidenceMask,
    mapping: &AffineMapping,
) -> Result<DepthMap> {
    check_dims(prior.dims(), mask.dims())?;
    let (w, h) = prior.dims();
    let mut out = DepthMap::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                continue;
            }
            if let Some(d) = mapping.depth_for(prior.get(x, y) as f64) {
                out.set(x, y, d as f32);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrectionStatus {
    /// Low-confidence pixels were replaced; `invalidated` of them had a
    /// non-positive implied inverse depth.
    Applied { refined: usize, invalidated: usize },
    /// The fit failed; the input depth is passed through unchanged.
    DegenerateFit(String),
}

#[derive(Debug, Clone)]
pub struct CorrectionOutcome {
    pub depth: DepthMap,
    pub mapping: Option<AffineMapping>,
    pub status: CorrectionStatus,
}

impl CorrectionOutcome {
    pub fn is_degenerate(&self) -> bool {
        matches!(self.status, CorrectionStatus::DegenerateFit(_))
    }

    pub fn degenerate_reason(&self) -> Option<&str> {
        match &self.status {
            CorrectionStatus::DegenerateFit(r) => Some(r),
            CorrectionStatus::Applied { .. } => None,
        }
    }
}

/// Keeps confident pixels bit-exactly and fills the rest from the prior.
///
/// The prior is bilinearly resampled when its resolution differs from the
/// depth map. A failed fit is reported in the outcome, never as an error;
/// errors are reserved for mismatched depth/confidence sizes.
pub fn correct_depth(
    depth: &DepthMap,
    conf: &ConfidenceMap,
    prior: &PriorMap,
    tau: f32,
    cfg: &FitConfig,
) -> Result<CorrectionOutcome> {
    check_dims(depth.dims(), conf.dims())?;
    let (w, h) = depth.dims();
    let prior = prior.resampled(w, h);
    let mask = confidence_mask(conf, tau);
    let mapping = match fit_mapping(depth, &prior, &mask, cfg) {
        Ok(m) => m,
        Err(e) => {
            return Ok(CorrectionOutcome {
                depth: depth.clone(),
                mapping: None,
                status: CorrectionStatus::DegenerateFit(e.to_string()),
            })
        }
    };
    let low = refine_low_confidence(&prior, &mask, &mapping)?;
    let mut out = depth.clone();
    let (mut refined, mut invalidated) = (0, 0);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                continue;
            }
            out.copy_pixel(&low, x, y);
            if low.is_valid(x, y) {
                refined += 1;
            } else {
                invalidated += 1;
            }
        }
    }
    Ok(CorrectionOutcome {
        depth: out,
        mapping: Some(mapping),
        status: CorrectionStatus::Applied {
            refined,
            invalidated,
        },
    })
}

/// A prior mapped to metric depth by fitting scale and shift to sparse points.
#[derive(Debug, Clone)]
pub struct SparseAlignment {
    pub depth: DepthMap,
    pub mapping: AffineMapping,
}

/// Fits `1/depth = a·prior + b` on sparse (pixel, depth) observations and
/// maps the whole prior through it. Points outside the prior or with
/// non-positive depth are ignored.
pub fn align_prior_to_sparse(prior: &PriorMap, sparse: &[(Pixel, f64)]) -> Result<SparseAlignment> {
    let samples: Vec<(f64, f64)> = sparse
        .iter()
        .filter(|(_, d)| *d > 0.0 && d.is_finite())
        .filter_map(|(p, d)| prior.sample(p.u, p.v).map(|v| (v as f64, 1.0 / d)))
        .collect();
    let mapping = fit_affine(&samples)?;
    let (w, h) = prior.dims();
    let mut depth = DepthMap::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if let Some(d) = mapping.depth_for(prior.get(x, y) as f64) {
                depth.set(x, y, d as f32);
            }
        }
    }
    Ok(SparseAlignment { depth, mapping })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior_from(w: usize, h: usize, f: impl FnMut(usize, usize) -> f32) -> PriorMap {
        PriorMap::new(Grid::from_fn(w, h, f)).unwrap()
    }

    #[test]
    fn mask_threshold_is_strict() {
        let conf = ConfidenceMap::new(Grid::from_vec(3, 1, vec![0.6, 0.5, 0.0]).unwrap()).unwrap();
        let m = confidence_mask(&conf, 0.5);
        assert_eq!(m.values().as_slice(), &[true, false, false]);
        let conf = ConfidenceMap::new(Grid::from_vec(3, 1, vec![0.6, 1e-6, 0.0]).unwrap()).unwrap();
        let m = confidence_mask(&conf, 0.0);
        assert_eq!(m.values().as_slice(), &[true, true, false]);
    }

    #[test]
    fn two_pixel_identity_fit() {
        let depth = DepthMap::from_values(Grid::from_vec(2, 1, vec![2.0, 4.0]).unwrap());
        let prior = PriorMap::new(Grid::from_vec(2, 1, vec![0.5, 0.25]).unwrap()).unwrap();
        let mask = ConfidenceMask::from_grid(Grid::filled(2, 1, true));
        let cfg = FitConfig {
            min_inliers: 2,
            ..FitConfig::default()
        };
        let m = fit_mapping(&depth, &prior, &mask, &cfg).unwrap();
        assert!((m.a - 1.0).abs() < 1e-15 && m.b.abs() < 1e-15);
        assert_eq!(m.num_inliers, 2);
        assert!(m.residual_rms < 1e-15);
    }

    #[test]
    fn exact_affine_samples_recover_coefficients() {
        let samples: Vec<(f64, f64)> = (0..500)
            .map(|i| {
                let x = i as f64 / 499.0;
                (x, 2.0 * x + 0.1)
            })
            .collect();
        let m = fit_affine(&samples).unwrap();
        assert!((m.a - 2.0).abs() < 1e-9 && (m.b - 0.1).abs() < 1e-9);
    }

    #[test]
    fn exact_affine_pixels_recover_coefficients() {
        let prior = prior_from(40, 30, |x, y| ((x + 40 * y) % 97) as f32 / 96.0);
        let depth = DepthMap::from_values(prior.values().map(|&p| (1.0 / (2.0 * p as f64 + 0.1)) as f32));
        let mask = ConfidenceMask::from_grid(Grid::filled(40, 30, true));
        let m = fit_mapping(&depth, &prior, &mask, &FitConfig::default()).unwrap();
        // depth is stored in single precision
        assert!((m.a - 2.0).abs() < 1e-6 && (m.b - 0.1).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn fit_errors_on_too_few_or_flat() {
        let prior = prior_from(20, 20, |_, _| 0.3);
        let depth = DepthMap::constant(20, 20, 2.0);
        let all = ConfidenceMask::from_grid(Grid::filled(20, 20, true));
        let err = fit_mapping(&depth, &prior, &all, &FitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)));
        let few = ConfidenceMask::from_grid(Grid::from_fn(20, 20, |x, _| x < 2));
        let prior = prior_from(20, 20, |x, y| (x + y) as f32 / 40.0);
        let err = fit_mapping(&depth, &prior, &few, &FitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)));
    }

    #[test]
    fn invalid_depth_pixels_are_not_inliers() {
        let prior = prior_from(2, 1, |x, _| x as f32);
        let mut depth = DepthMap::constant(2, 1, 2.0);
        depth.invalidate(1, 0);
        let mask = ConfidenceMask::from_grid(Grid::filled(2, 1, true));
        let cfg = FitConfig {
            min_inliers: 2,
            ..FitConfig::default()
        };
        assert!(fit_mapping(&depth, &prior, &mask, &cfg).is_err());
    }

    #[test]
    fn subsampling_is_deterministic() {
        let prior = prior_from(50, 50, |x, y| ((x * 31 + y * 17) % 101) as f32 / 100.0);
        let depth = DepthMap::from_values(Grid::from_fn(50, 50, |x, y| 1.0 + ((x * 7 + y) % 13) as f32));
        let mask = ConfidenceMask::from_grid(Grid::filled(50, 50, true));
        let cfg = FitConfig {
            min_inliers: 10,
            max_samples: 300,
            seed: 5,
        };
        let a = fit_mapping(&depth, &prior, &mask, &cfg).unwrap();
        let b = fit_mapping(&depth, &prior, &mask, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_inliers, 300);
    }

    #[test]
    fn refine_examples() {
        let prior = PriorMap::new(Grid::from_vec(3, 1, vec![0.2, 0.45, 0.2]).unwrap()).unwrap();
        let mask = ConfidenceMask::from_grid(Grid::from_vec(3, 1, vec![false, false, true]).unwrap());
        let unit = AffineMapping {
            a: 1.0,
            b: 0.0,
            num_inliers: 2,
            residual_rms: 0.0,
        };
        let out = refine_low_confidence(&prior, &mask, &unit).unwrap();
        assert!((out.get(0, 0).unwrap() - 5.0).abs() < 1e-6);
        assert!(out.get(2, 0).is_none(), "mask-1 pixels are left unset");

        let m = AffineMapping { a: 2.0, b: 0.1, ..unit };
        let out = refine_low_confidence(&prior, &mask, &m).unwrap();
        assert!((out.get(1, 0).unwrap() - 1.0).abs() < 1e-6);

        let neg = AffineMapping { a: -1.0, b: 0.05, ..unit };
        let out = refine_low_confidence(&prior, &mask, &neg).unwrap();
        assert!(out.get(0, 0).is_none());
    }

    #[test]
    fn full_confidence_passes_through() {
        let prior = prior_from(30, 20, |x, _| x as f32 / 29.0);
        let depth = DepthMap::from_values(Grid::from_fn(30, 20, |x, y| 1.0 + (x * y) as f32 * 0.01));
        let conf = ConfidenceMap::constant(30, 20, 1.0);
        let out = correct_depth(&depth, &conf, &prior, 0.5, &FitConfig::default()).unwrap();
        assert_eq!(out.depth, depth);
        assert_eq!(out.status, CorrectionStatus::Applied { refined: 0, invalidated: 0 });
    }

    #[test]
    fn zero_confidence_is_degenerate_pass_through() {
        let prior = prior_from(30, 20, |x, _| x as f32 / 29.0);
        let depth = DepthMap::constant(30, 20, 3.0);
        let conf = ConfidenceMap::constant(30, 20, 0.0);
        let out = correct_depth(&depth, &conf, &prior, 0.5, &FitConfig::default()).unwrap();
        assert!(out.is_degenerate());
        assert!(out.mapping.is_none());
        assert_eq!(out.depth, depth);
    }

    #[test]
    fn corrupted_low_confidence_region_is_recovered() {
        let (w, h) = (40, 30);
        let prior = prior_from(w, h, |x, y| (x as f32 / 39.0) * 0.7 + (y as f32 / 29.0) * 0.3);
        let truth = |p: f32| 1.0 / (1.5 * p as f64 + 0.2);
        let conf = ConfidenceMap::new(Grid::from_fn(w, h, |x, _| if x < 10 { 0.1 } else { 0.9 })).unwrap();
        let depth = DepthMap::from_values(Grid::from_fn(w, h, |x, y| {
            if x < 10 {
                42.0
            } else {
                truth(prior.get(x, y)) as f32
            }
        }));
        let out = correct_depth(&depth, &conf, &prior, 0.5, &FitConfig::default()).unwrap();
        for y in 0..h {
            for x in 0..w {
                let got = out.depth.get(x, y).unwrap();
                if x < 10 {
                    let t = truth(prior.get(x, y));
                    assert!(((got as f64 - t) / t).abs() < 1e-6);
                } else {
                    assert_eq!(got.to_bits(), depth.raw(x, y).to_bits());
                }
            }
        }
    }

    #[test]
    fn sparse_alignment_examples() {
        let prior = prior_from(16, 12, |x, y| (x + y) as f32 / 26.0);
        let truth = |p: f64| 1.0 / (0.8 * p + 0.05);
        let sparse: Vec<(Pixel, f64)> = [(1, 2), (7, 3), (15, 11), (4, 9)]
            .iter()
            .map(|&(x, y)| (Pixel::new(x as f64, y as f64), truth(prior.get(x, y) as f64)))
            .collect();
        let al = align_prior_to_sparse(&prior, &sparse).unwrap();
        assert!((al.mapping.a - 0.8).abs() < 1e-9 && (al.mapping.b - 0.05).abs() < 1e-9);
        assert!(al.mapping.residual_rms < 1e-12);

        let two = align_prior_to_sparse(&prior, &sparse[..2]).unwrap();
        assert!(two.mapping.residual_rms < 1e-12);

        let flat = prior_from(8, 8, |_, _| 0.5);
        let pts = vec![(Pixel::new(1.0, 1.0), 2.0), (Pixel::new(5.0, 5.0), 3.0)];
        assert!(matches!(
            align_prior_to_sparse(&flat, &pts).unwrap_err(),
            Error::DegenerateFit(_)
        ));
    }
}
