//! Pseudo-supervised training samples built from a depth prior.
//!
//! A prior is denormalized with random perturbations into a supervision depth,
//! the reference image is forward-splatted into neighboring camera poses with
//! that depth, and the resulting (reference, warped sources, depth) triple is
//! a stereo sample whose correspondences are exact by construction.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, unproject, CameraView, Pixel};
use crate::io::PairList;
use crate::prior::{denormalize, sample_perturbations, PerturbationTriple, PriorMap};
use crate::raster::{DepthMap, Grid, RgbImage};

/// Holes up to this many pixels from a splatted pixel are filled.
pub const HOLE_FILL_RADIUS: i64 = 2;

/// Default size of the neighbor pool poses are drawn from.
pub const DEFAULT_NEIGHBOR_POOL: usize = 10;

/// Camera indices of `reference`'s neighbors, best first: pair-file order when
/// available, otherwise ascending camera-center distance (ties by index).
pub fn rank_neighbors(reference: usize, cameras: &[CameraView], pairs: Option<&PairList>) -> Vec<usize> {
    match pairs {
        Some(p) => p
            .neighbors(reference)
            .iter()
            .map(|n| n.id)
            .filter(|&id| id != reference && id < cameras.len())
            .collect(),
        None => {
            let c = cameras[reference].center();
            let mut ids: Vec<(f64, usize)> = cameras
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != reference)
                .map(|(i, cam)| ((cam.center() - c).norm(), i))
                .collect();
            ids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            ids.into_iter().map(|(_, i)| i).collect()
        }
    }
}

/// Draws `n` distinct views uniformly from the top-`pool` neighbors of `reference`.
pub fn sample_view_poses<R: Rng + ?Sized>(
    reference: usize,
    cameras: &[CameraView],
    pairs: Option<&PairList>,
    n: usize,
    pool: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if reference >= cameras.len() {
        return Err(Error::InvalidArgument(format!(
            "reference view {reference} out of range"
        )));
    }
    let mut candidates = rank_neighbors(reference, cameras, pairs);
    candidates.truncate(pool);
    if candidates.len() < n {
        return Err(Error::NotEnoughViews {
            view: reference,
            needed: n,
            available: candidates.len(),
        });
    }
    Ok(candidates.choose_multiple(rng, n).copied().collect())
}

/// Per-pixel state of a forward-warped image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplatState {
    Empty,
    Splatted,
    Filled,
}

impl SplatState {
    pub fn is_valid(self) -> bool {
        self != SplatState::Empty
    }

    /// 0 empty, 255 splatted, 128 filled.
    pub fn to_byte(self) -> u8 {
        match self {
            SplatState::Empty => 0,
            SplatState::Splatted => 255,
            SplatState::Filled => 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardWarp {
    pub image: RgbImage,
    pub mask: Grid<SplatState>,
    /// Depth of the winning splat in the destination camera (filled pixels
    /// inherit their donor's depth).
    pub depth: DepthMap,
}

/// Splats every pixel of `image` with its depth into `dst_cam`, resolving
/// collisions by z-buffer (nearest wins, first writer on exact ties). Then
/// fills empty pixels within [`HOLE_FILL_RADIUS`] from the nearest splatted
/// pixel. Output has `dst_cam`'s image size.
pub fn forward_warp(
    image: &RgbImage,
    depth: &DepthMap,
    src_cam: &CameraView,
    dst_cam: &CameraView,
) -> Result<ForwardWarp> {
    image.same_dims(depth.values())?;
    let (w, h) = dst_cam.image_size();
    let mut out = Grid::filled(w, h, [0.0f32; 3]);
    let mut zbuf = Grid::filled(w, h, f64::INFINITY);
    let mut mask = Grid::filled(w, h, SplatState::Empty);
    let (sw, sh) = image.dims();
    for y in 0..sh {
        for x in 0..sw {
            let Some(d) = depth.get(x, y) else { continue };
            let Ok(world) = unproject(Pixel::new(x as f64, y as f64), d as f64, src_cam) else {
                continue;
            };
            let Ok((p, z)) = project(&world, dst_cam) else { continue };
            let (u, v) = (p.u.round(), p.v.round());
            if u < 0.0 || v < 0.0 || u >= w as f64 || v >= h as f64 {
                continue;
            }
            let (u, v) = (u as usize, v as usize);
            if z < *zbuf.get(u, v) {
                zbuf.set(u, v, z);
                out.set(u, v, *image.get(x, y));
                mask.set(u, v, SplatState::Splatted);
            }
        }
    }

    // nearest-first offsets within the fill radius
    let mut offsets: Vec<(i64, i64)> = Vec::new();
    for dy in -HOLE_FILL_RADIUS..=HOLE_FILL_RADIUS {
        for dx in -HOLE_FILL_RADIUS..=HOLE_FILL_RADIUS {
            if (dx, dy) != (0, 0) && dx * dx + dy * dy <= HOLE_FILL_RADIUS * HOLE_FILL_RADIUS {
                offsets.push((dx, dy));
            }
        }
    }
    offsets.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    let splatted = mask.clone();
    for y in 0..h {
        for x in 0..w {
            if *splatted.get(x, y) != SplatState::Empty {
                continue;
            }
            let donor = offsets.iter().find_map(|&(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    return None;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                (*splatted.get(nx, ny) == SplatState::Splatted).then_some((nx, ny))
            });
            if let Some((nx, ny)) = donor {
                out.set(x, y, *out.get(nx, ny));
                zbuf.set(x, y, *zbuf.get(nx, ny));
                mask.set(x, y, SplatState::Filled);
            }
        }
    }
    let depth_out = Grid::from_fn(w, h, |x, y| {
        let z = *zbuf.get(x, y);
        if z.is_finite() {
            z as f32
        } else {
            0.0
        }
    });
    Ok(ForwardWarp {
        image: out,
        mask,
        depth: DepthMap::from_values(depth_out),
    })
}

/// One pseudo-supervised stereo sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub reference_id: usize,
    pub reference_image: RgbImage,
    pub reference_view: CameraView,
    pub source_ids: Vec<usize>,
    pub source_images: Vec<ForwardWarp>,
    pub source_views: Vec<CameraView>,
    pub supervision_depth: DepthMap,
    pub perturbation: PerturbationTriple,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Warped source views per sample.
    pub num_views: usize,
    /// Neighbor pool for pose sampling.
    pub neighbor_pool: usize,
    /// Apply random perturbations when denormalizing.
    pub perturb: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_views: 2,
            neighbor_pool: DEFAULT_NEIGHBOR_POOL,
            perturb: true,
        }
    }
}

/// Builds a sample for view `reference` of a scene with `cameras`.
///
/// The prior is resampled to the reference image size when needed. Uses the
/// reference camera's depth range for denormalization.
pub fn build_training_sample<R: Rng + ?Sized>(
    reference_image: &RgbImage,
    prior: &PriorMap,
    reference: usize,
    cameras: &[CameraView],
    pairs: Option<&PairList>,
    cfg: &SynthConfig,
    rng: &mut R,
) -> Result<TrainingSample> {
    if cfg.num_views < 1 {
        return Err(Error::InvalidArgument("a sample needs at least one source view".into()));
    }
    let ref_cam = cameras
        .get(reference)
        .ok_or_else(|| Error::InvalidArgument(format!("reference view {reference} out of range")))?;
    let (w, h) = reference_image.dims();
    if ref_cam.image_size() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: ref_cam.image_size(),
            actual: (w, h),
        });
    }
    let prior = prior.resampled(w, h);
    let (d_min, d_max) = (ref_cam.depth_min(), ref_cam.depth_max());
    let perturbation = if cfg.perturb {
        sample_perturbations(d_min, d_max, rng)?
    } else {
        PerturbationTriple::ZERO
    };
    let supervision_depth = denormalize(&prior, d_min, d_max, &perturbation)?;
    let source_ids = sample_view_poses(reference, cameras, pairs, cfg.num_views, cfg.neighbor_pool, rng)?;
    let mut source_images = Vec::with_capacity(source_ids.len());
    let mut source_views = Vec::with_capacity(source_ids.len());
    for &id in &source_ids {
        // warped views share the reference resolution
        let dst = cameras[id].with_image_size(w, h);
        source_images.push(forward_warp(reference_image, &supervision_depth, ref_cam, &dst)?);
        source_views.push(dst);
    }
    Ok(TrainingSample {
        reference_id: reference,
        reference_image: reference_image.clone(),
        reference_view: ref_cam.clone(),
        source_ids,
        source_images,
        source_views,
        supervision_depth,
        perturbation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// One weight per scale, coarsest first.
    pub scale_weights: Vec<f64>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            scale_weights: vec![1.0; 3],
        }
    }
}

impl LossConfig {
    pub fn num_scales(&self) -> usize {
        self.scale_weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale_weights.is_empty() {
            return Err(Error::InvalidArgument("at least one scale is required".into()));
        }
        if self.scale_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("scale weights must be finite and non-negative".into()));
        }
        if self.scale_weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidArgument("scale weights must not all be zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// Unweighted mean absolute error per scale, coarsest first.
    pub per_scale: Vec<f64>,
}

/// Weighted sum of per-scale mean absolute depth errors.
///
/// `predictions[k]` (coarsest first) must have the target resolution divided
/// by 2^(S−1−k); the target is decimated by nearest neighbor to match. Errors
/// are averaged over pixels valid in both the decimated target and the
/// prediction.
pub fn multi_scale_loss(
    predictions: &[DepthMap],
    target: &DepthMap,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    let s = cfg.num_scales();
    if predictions.len() != s {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {s} scales",
            predictions.len()
        )));
    }
    let mut per_scale = Vec::with_capacity(s);
    for (k, pred) in predictions.iter().enumerate() {
        let factor = 1usize << (s - 1 - k);
        let tgt = target.downsample_nearest(factor);
        if pred.dims() != tgt.dims() {
            return Err(Error::DimensionMismatch {
                expected: tgt.dims(),
                actual: pred.dims(),
            });
        }
        let (w, h) = tgt.dims();
        let (mut sum, mut n) = (0.0f64, 0usize);
        for y in 0..h {
            for x in 0..w {
                if let (Some(p), Some(t)) = (pred.get(x, y), tgt.get(x, y)) {
                    sum += (p as f64 - t as f64).abs();
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(Error::NoValidPixels(format!("scale {k} has no valid pixels")));
        }
        per_scale.push(sum / n as f64);
    }
    let total = per_scale
        .iter()
        .zip(&cfg.scale_weights)
        .map(|(l, w)| l * w)
        .sum();
    Ok(LossBreakdown { total, per_scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::pair::Neighbor;
    use crate::rng::stream_rng;
    use nalgebra::{Matrix3, Vector3};

    fn line_cams(xs: &[f64]) -> Vec<CameraView> {
        xs.iter()
            .map(|&x| {
                CameraView::look(
                    20.0,
                    (9.5, 7.5),
                    Matrix3::identity(),
                    Vector3::new(x, 0.0, 0.0),
                    (1.0, 10.0),
                    (20, 16),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn pair_file_order_and_pool() {
        let cams = line_cams(&[0.0; 12].iter().enumerate().map(|(i, _)| i as f64).collect::<Vec<_>>());
        let mut lists = vec![Vec::new(); 12];
        lists[0] = [3, 7, 1, 2, 4, 5, 6, 8, 9, 10, 11]
            .iter()
            .map(|&id| Neighbor { id, score: 1.0 })
            .collect();
        let pairs = PairList::new(lists).unwrap();
        let pool = &[3, 7, 1, 2, 4, 5, 6, 8, 9, 10];
        let mut rng = stream_rng(3, 0);
        for _ in 0..50 {
            let picked = sample_view_poses(0, &cams, Some(&pairs), 2, 10, &mut rng).unwrap();
            assert_eq!(picked.len(), 2);
            assert_ne!(picked[0], picked[1]);
            assert!(picked.iter().all(|id| pool.contains(id)));
        }
    }

    #[test]
    fn exhaustive_and_deficient_pools() {
        let cams = line_cams(&[0.0, 1.0, 2.0, 3.0]);
        let mut picked = sample_view_poses(1, &cams, None, 3, 10, &mut stream_rng(0, 0)).unwrap();
        picked.sort();
        assert_eq!(picked, vec![0, 2, 3]);
        let err = sample_view_poses(1, &cams, None, 4, 10, &mut stream_rng(0, 0)).unwrap_err();
        assert!(matches!(err, Error::NotEnoughViews { view: 1, needed: 4, available: 3 }));
    }

    #[test]
    fn distance_ranking_matches_sorted_distances() {
        let xs = [0.0, 5.0, -1.5, 2.0, -3.0, 0.5];
        let cams = line_cams(&xs);
        // brute force: sort other indices by |x_i - x_0|
        let mut expect: Vec<usize> = (1..xs.len()).collect();
        expect.sort_by(|&a, &b| (xs[a] - xs[0]).abs().total_cmp(&(xs[b] - xs[0]).abs()));
        assert_eq!(rank_neighbors(0, &cams, None), expect);
    }

    #[test]
    fn identity_pose_warp_is_identity() {
        let cams = line_cams(&[0.0]);
        let img = Grid::from_fn(20, 16, |x, y| [x as f32, y as f32, (x * y) as f32]);
        let depth = DepthMap::from_values(Grid::from_fn(20, 16, |x, _| 2.0 + x as f32 * 0.1));
        let out = forward_warp(&img, &depth, &cams[0], &cams[0]).unwrap();
        assert_eq!(out.image, img);
        assert!(out.mask.as_slice().iter().all(|&m| m == SplatState::Splatted));
    }

    #[test]
    fn zbuffer_keeps_nearest_surface() {
        // two source pixels land on the same destination pixel; the nearer wins
        let cams = line_cams(&[0.0, 0.5]);
        let mut img = Grid::filled(20, 16, [0.0f32; 3]);
        let mut depth = DepthMap::empty(20, 16);
        // far pixel at column 10 depth 10 shifts by 20·0.5/10 = 1 px -> 9
        img.set(10, 8, [200.0, 0.0, 0.0]);
        depth.set(10, 8, 10.0);
        // near pixel at column 14 depth 2 shifts by 5 px -> 9
        img.set(14, 8, [0.0, 200.0, 0.0]);
        depth.set(14, 8, 2.0);
        let out = forward_warp(&img, &depth, &cams[0], &cams[1]).unwrap();
        assert_eq!(*out.image.get(9, 8), [0.0, 200.0, 0.0]);
        assert_eq!(*out.mask.get(9, 8), SplatState::Splatted);
        assert!((out.depth.get(9, 8).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn holes_are_filled_within_radius_only() {
        let cams = line_cams(&[0.0]);
        let mut img = Grid::filled(20, 16, [0.0f32; 3]);
        let mut depth = DepthMap::empty(20, 16);
        img.set(5, 5, [9.0, 9.0, 9.0]);
        depth.set(5, 5, 3.0);
        let out = forward_warp(&img, &depth, &cams[0], &cams[0]).unwrap();
        assert_eq!(*out.mask.get(5, 5), SplatState::Splatted);
        assert_eq!(*out.mask.get(7, 5), SplatState::Filled);
        assert_eq!(*out.image.get(6, 6), [9.0, 9.0, 9.0]);
        assert_eq!(*out.mask.get(7, 7), SplatState::Empty);
        assert_eq!(*out.mask.get(8, 5), SplatState::Empty);
    }

    #[test]
    fn loss_examples() {
        let target = DepthMap::from_values(Grid::from_fn(8, 8, |x, y| 1.0 + (x + 2 * y) as f32));
        let cfg = LossConfig::default();
        let preds: Vec<DepthMap> = [4, 2, 1].iter().map(|&f| target.downsample_nearest(f)).collect();
        let l = multi_scale_loss(&preds, &target, &cfg).unwrap();
        assert_eq!(l.total, 0.0);

        let single = LossConfig {
            scale_weights: vec![1.0],
        };
        let shifted = DepthMap::from_values(target.values().map(|d| d + 1.0));
        assert_eq!(multi_scale_loss(&[shifted], &target, &single).unwrap().total, 1.0);

        let offsets = [0.5f32, 0.25, 0.1];
        let preds: Vec<DepthMap> = [4, 2, 1]
            .iter()
            .zip(offsets)
            .map(|(&f, o)| DepthMap::from_values(target.downsample_nearest(f).values().map(|d| d + o)))
            .collect();
        let l = multi_scale_loss(&preds, &target, &cfg).unwrap();
        for (got, want) in l.per_scale.iter().zip(offsets) {
            assert!((got - want as f64).abs() < 1e-6);
        }
        assert!((l.total - 0.85).abs() < 1e-6);
    }

    #[test]
    fn loss_errors() {
        let target = DepthMap::constant(8, 8, 2.0);
        let cfg = LossConfig::default();
        let bad_size = vec![DepthMap::constant(2, 2, 2.0), DepthMap::constant(4, 4, 2.0), DepthMap::constant(4, 4, 2.0)];
        assert!(multi_scale_loss(&bad_size, &target, &cfg).is_err());
        let empty = vec![DepthMap::empty(2, 2), DepthMap::constant(4, 4, 2.0), DepthMap::constant(8, 8, 2.0)];
        assert!(matches!(
            multi_scale_loss(&empty, &target, &cfg).unwrap_err(),
            Error::NoValidPixels(_)
        ));
        let zero = LossConfig {
            scale_weights: vec![0.0, 0.0],
        };
        assert!(zero.validate().is_err());
    }
}
