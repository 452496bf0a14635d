//! Depth priors: normalized inverse-depth maps from a monocular model, and
//! their randomized denormalization into metric depth.

use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::{resize_bilinear, DepthMap, Grid};

/// Values outside [0, 1] by more than this are rejected; smaller drift is clamped.
pub const PRIOR_RANGE_TOLERANCE: f32 = 1e-6;

/// Normalized inverse depth in [0, 1]: 1 is nearest, 0 farthest.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMap {
    values: Grid<f32>,
}

impl PriorMap {
    pub fn new(mut values: Grid<f32>) -> Result<Self> {
        for v in values.as_mut_slice() {
            if !v.is_finite() {
                return Err(Error::InvalidPrior(format!("non-finite value {v}")));
            }
            if *v < -PRIOR_RANGE_TOLERANCE || *v > 1.0 + PRIOR_RANGE_TOLERANCE {
                return Err(Error::InvalidPrior(format!(
                    "value {v} outside [0, 1] beyond tolerance {PRIOR_RANGE_TOLERANCE}"
                )));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { values })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        *self.values.get(x, y)
    }

    pub fn values(&self) -> &Grid<f32> {
        &self.values
    }

    /// Bilinear resample to `width`×`height`; identity when sizes already match.
    pub fn resampled(&self, width: usize, height: usize) -> PriorMap {
        if self.dims() == (width, height) {
            return self.clone();
        }
        let values = resize_bilinear(&self.values, width, height).map(|v| v.clamp(0.0, 1.0));
        PriorMap { values }
    }

    /// Bilinear lookup at a continuous pixel; `None` outside the image.
    pub fn sample(&self, u: f64, v: f64) -> Option<f32> {
        crate::raster::sample_bilinear(&self.values, u, v)
    }
}

/// Random offsets applied while denormalizing a prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationTriple {
    /// Shift of the near bound, in [0, (max − min)/2].
    pub eta1: f64,
    /// Shift of the far bound, in [−(max − min)/2, 0].
    pub eta2: f64,
    /// Global depth offset, in [−eta1, −eta2].
    pub eta3: f64,
}

impl PerturbationTriple {
    pub const ZERO: PerturbationTriple = PerturbationTriple {
        eta1: 0.0,
        eta2: 0.0,
        eta3: 0.0,
    };

    pub fn validate(&self, d_min: f64, d_max: f64) -> Result<()> {
        let half = 0.5 * (d_max - d_min);
        let ok = (0.0..=half).contains(&self.eta1)
            && (-half..=0.0).contains(&self.eta2)
            && (-self.eta1..=-self.eta2).contains(&self.eta3);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "perturbation {self:?} violates its intervals for depth range [{d_min}, {d_max}]"
            )))
        }
    }
}

fn check_range(d_min: f64, d_max: f64) -> Result<()> {
    if !(d_min > 0.0 && d_max > d_min && d_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "depth range must satisfy 0 < min < max, got [{d_min}, {d_max}]"
        )));
    }
    Ok(())
}

/// Draws eta1 ~ U[0, h], eta2 ~ U[−h, 0], eta3 ~ U[−eta1, −eta2] with
/// h = (d_max − d_min)/2.
pub fn sample_perturbations<R: Rng + ?Sized>(
    d_min: f64,
    d_max: f64,
    rng: &mut R,
) -> Result<PerturbationTriple> {
    check_range(d_min, d_max)?;
    let half = 0.5 * (d_max - d_min);
    let eta1 = rng.random_range(0.0..=half);
    let eta2 = -rng.random_range(0.0..=half);
    let eta3 = rng.random_range(-eta1..=-eta2);
    Ok(PerturbationTriple { eta1, eta2, eta3 })
}

/// Maps one normalized inverse-depth value to metric depth.
///
/// The near/far bounds are shifted by `eta1`/`eta2`, the value is linearly
/// interpolated in inverse depth, inverted, and shifted by `eta3`. The result
/// always lies in [d_min, d_max] for valid perturbations; the endpoints are
/// evaluated without the reciprocal round trip so that 0 and 1 map exactly.
pub fn denormalize_value(prior: f64, d_min: f64, d_max: f64, pert: &PerturbationTriple) -> f64 {
    let near = d_min + pert.eta1;
    let far = d_max + pert.eta2;
    let depth = if prior <= 0.0 {
        far
    } else if prior >= 1.0 {
        near
    } else {
        let inv_far = 1.0 / far;
        1.0 / (prior * (1.0 / near - inv_far) + inv_far)
    };
    (depth + pert.eta3).clamp(d_min, d_max)
}

/// Largest f32 not above `hi` and not below `lo` closest to `v`.
fn f32_within(v: f64, lo: f64, hi: f64) -> f32 {
    let mut f = v as f32;
    if f as f64 > hi {
        f = f.next_down();
    }
    if (f as f64) < lo {
        f = f.next_up();
    }
    f
}

/// Denormalizes a whole prior map into a depth map within [d_min, d_max].
pub fn denormalize(
    prior: &PriorMap,
    d_min: f64,
    d_max: f64,
    pert: &PerturbationTriple,
) -> Result<DepthMap> {
    check_range(d_min, d_max)?;
    pert.validate(d_min, d_max)?;
    let values = prior
        .values
        .map(|&p| f32_within(denormalize_value(p as f64, d_min, d_max, pert), d_min, d_max));
    Ok(DepthMap::from_values(values))
}
