//! Pinhole cameras, projection, cross-view reprojection and plane-sweep
//! homographies.
//!
//! Pixel centers sit at integer coordinates with the origin at the top-left
//! pixel; +u points right and +v down. Extrinsics map world to camera.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};
use crate::raster::{sample_bilinear, GrayImage, Grid};

const MIN_CAMERA_Z: f64 = 1e-12;
pub(crate) const ROTATION_TOL: f64 = 1e-9;

/// Continuous image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// A calibrated view: intrinsics, world-to-camera pose, depth range and image size.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    intrinsics: Matrix3<f64>,
    intrinsics_inv: Matrix3<f64>,
    extrinsics: Matrix4<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    depth_min: f64,
    depth_max: f64,
    width: usize,
    height: usize,
}

impl CameraView {
    pub fn new(
        intrinsics: Matrix3<f64>,
        extrinsics: Matrix4<f64>,
        depth_min: f64,
        depth_max: f64,
        image_size: (usize, usize),
    ) -> Result<Self> {
        let k = &intrinsics;
        if k.iter().any(|v| !v.is_finite()) || extrinsics.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCamera("non-finite calibration entry".into()));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 || k[(2, 2)] != 1.0 {
            return Err(Error::InvalidCamera(
                "intrinsics must be upper triangular with K[2][2] = 1".into(),
            ));
        }
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) {
            return Err(Error::InvalidCamera("focal lengths must be positive".into()));
        }
        let bottom = extrinsics.fixed_view::<1, 4>(3, 0);
        if bottom[0] != 0.0 || bottom[1] != 0.0 || bottom[2] != 0.0 || bottom[3] != 1.0 {
            return Err(Error::InvalidCamera(
                "extrinsics bottom row must be [0 0 0 1]".into(),
            ));
        }
        let rotation: Matrix3<f64> = extrinsics.fixed_view::<3, 3>(0, 0).into_owned();
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho_err > ROTATION_TOL || rotation.determinant() <= 0.0 {
            return Err(Error::InvalidCamera(format!(
                "rotation is not a proper orthonormal matrix (|RᵀR - I| = {ortho_err:e})"
            )));
        }
        if !(depth_min > 0.0 && depth_max > depth_min && depth_max.is_finite()) {
            return Err(Error::InvalidCamera(format!(
                "depth range must satisfy 0 < min < max, got [{depth_min}, {depth_max}]"
            )));
        }
        let intrinsics_inv = upper_triangular_inverse(&intrinsics);
        let translation = Vector3::new(extrinsics[(0, 3)], extrinsics[(1, 3)], extrinsics[(2, 3)]);
        Ok(Self {
            intrinsics,
            intrinsics_inv,
            extrinsics,
            rotation,
            translation,
            depth_min,
            depth_max,
            width: image_size.0,
            height: image_size.1,
        })
    }

    /// Camera with `f`, principal point `(cx, cy)`, rotation `r` and center `c`
    /// in world coordinates.
    pub fn look(
        focal: f64,
        principal: (f64, f64),
        rotation: Matrix3<f64>,
        center: Vector3<f64>,
        depth_range: (f64, f64),
        image_size: (usize, usize),
    ) -> Result<Self> {
        let k = Matrix3::new(focal, 0.0, principal.0, 0.0, focal, principal.1, 0.0, 0.0, 1.0);
        let t = -(rotation * center);
        let mut e = Matrix4::identity();
        e.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        e[(0, 3)] = t.x;
        e[(1, 3)] = t.y;
        e[(2, 3)] = t.z;
        Self::new(k, e, depth_range.0, depth_range.1, image_size)
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn extrinsics(&self) -> &Matrix4<f64> {
        &self.extrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn depth_min(&self) -> f64 {
        self.depth_min
    }

    pub fn depth_max(&self) -> f64 {
        self.depth_max
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn with_depth_range(&self, depth_min: f64, depth_max: f64) -> Result<Self> {
        Self::new(
            self.intrinsics,
            self.extrinsics,
            depth_min,
            depth_max,
            self.image_size(),
        )
    }

    pub fn with_image_size(&self, width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ..self.clone()
        }
    }

    /// Camera for an image resampled by `scale` under the pixel-center
    /// convention: u' = scale·u + (scale − 1)/2.
    pub fn scaled(&self, scale: f64, width: usize, height: usize) -> Self {
        let offset = (scale - 1.0) / 2.0;
        let s = Matrix3::new(scale, 0.0, offset, 0.0, scale, offset, 0.0, 0.0, 1.0);
        let intrinsics = s * self.intrinsics;
        Self {
            intrinsics,
            intrinsics_inv: upper_triangular_inverse(&intrinsics),
            width,
            height,
            ..self.clone()
        }
    }

    /// Transforms a world point into this camera's frame.
    #[inline]
    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    #[inline]
    pub fn to_world(&self, cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (cam - self.translation)
    }

    /// Pixel ray with unit z in the camera frame.
    #[inline]
    pub fn ray(&self, pixel: Pixel) -> Vector3<f64> {
        self.intrinsics_inv * Vector3::new(pixel.u, pixel.v, 1.0)
    }
}

/// Closed-form inverse of a pinhole intrinsics matrix (upper triangular, unit corner).
fn upper_triangular_inverse(k: &Matrix3<f64>) -> Matrix3<f64> {
    let (fx, s, cx) = (k[(0, 0)], k[(0, 1)], k[(0, 2)]);
    let (fy, cy) = (k[(1, 1)], k[(1, 2)]);
    Matrix3::new(
        1.0 / fx,
        -s / (fx * fy),
        (s * cy - cx * fy) / (fx * fy),
        0.0,
        1.0 / fy,
        -cy / fy,
        0.0,
        0.0,
        1.0,
    )
}

/// Projects a world point; returns the pixel and camera-frame depth.
pub fn project(point: &Vector3<f64>, cam: &CameraView) -> Result<(Pixel, f64)> {
    project_camera_point(&cam.to_camera(point), cam)
}

#[inline]
fn project_camera_point(pc: &Vector3<f64>, cam: &CameraView) -> Result<(Pixel, f64)> {
    if !(pc.z > MIN_CAMERA_Z) {
        return Err(Error::BehindCamera { z: pc.z });
    }
    let h = cam.intrinsics * pc;
    Ok((Pixel::new(h.x / h.z, h.y / h.z), pc.z))
}

/// Lifts a pixel at camera-frame depth `depth` back to world coordinates.
pub fn unproject(pixel: Pixel, depth: f64, cam: &CameraView) -> Result<Vector3<f64>> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "unproject needs a positive depth, got {depth}"
        )));
    }
    Ok(cam.to_world(&(cam.ray(pixel) * depth)))
}

/// Maps a pixel with known depth in `src` to its pixel and depth in `dst`.
pub fn reproject(
    pixel: Pixel,
    depth: f64,
    src: &CameraView,
    dst: &CameraView,
) -> Result<(Pixel, f64)> {
    let world = unproject(pixel, depth, src)?;
    project(&world, dst)
}

/// Relative pose taking reference-camera coordinates to source-camera coordinates.
pub fn relative_pose(reference: &CameraView, source: &CameraView) -> (Matrix3<f64>, Vector3<f64>) {
    let r = source.rotation * reference.rotation.transpose();
    let t = source.translation - r * reference.translation;
    (r, t)
}

/// Homography family induced by fronto-parallel planes in the reference frame:
/// H(d) = K_src (R + t nᵀ / d) K_ref⁻¹ = `affine + parallax / d`.
#[derive(Debug, Clone, Copy)]
pub struct PlaneSweepHomography {
    affine: Matrix3<f64>,
    parallax: Matrix3<f64>,
}

impl PlaneSweepHomography {
    pub fn new(reference: &CameraView, source: &CameraView) -> Self {
        let (r, t) = relative_pose(reference, source);
        let n = Vector3::new(0.0, 0.0, 1.0);
        let affine = source.intrinsics * r * reference.intrinsics_inv;
        let parallax = source.intrinsics * (t * n.transpose()) * reference.intrinsics_inv;
        Self { affine, parallax }
    }

    #[inline]
    pub fn at_depth(&self, depth: f64) -> Matrix3<f64> {
        self.affine + self.parallax / depth
    }
}

/// Applies a homography to a pixel; `None` when the point maps to infinity or
/// behind the source camera.
#[inline]
pub fn apply_homography(h: &Matrix3<f64>, u: f64, v: f64) -> Option<Pixel> {
    let x = h[(0, 0)] * u + h[(0, 1)] * v + h[(0, 2)];
    let y = h[(1, 0)] * u + h[(1, 1)] * v + h[(1, 2)];
    let w = h[(2, 0)] * u + h[(2, 1)] * v + h[(2, 2)];
    if !(w > MIN_CAMERA_Z) {
        return None;
    }
    Some(Pixel::new(x / w, y / w))
}

/// A source image resampled into the reference view, with per-pixel validity.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedImage {
    pub image: GrayImage,
    pub valid: Grid<bool>,
}

/// Warps `src_image` into the reference view through the plane at
/// `depth_hypothesis` (reference frame, fronto-parallel). Output has the
/// reference image size.
pub fn planesweep_warp(
    src_image: &GrayImage,
    reference: &CameraView,
    source: &CameraView,
    depth_hypothesis: f64,
) -> Result<WarpedImage> {
    if !(depth_hypothesis >= reference.depth_min && depth_hypothesis <= reference.depth_max) {
        return Err(Error::InvalidArgument(format!(
            "depth hypothesis {depth_hypothesis} outside [{}, {}]",
            reference.depth_min, reference.depth_max
        )));
    }
    let h = PlaneSweepHomography::new(reference, source).at_depth(depth_hypothesis);
    let (w, ht) = reference.image_size();
    let mut image = Grid::filled(w, ht, 0.0f32);
    let mut valid = Grid::filled(w, ht, false);
    for y in 0..ht {
        for x in 0..w {
            let sample = apply_homography(&h, x as f64, y as f64)
                .and_then(|p| sample_bilinear(src_image, p.u, p.v));
            if let Some(s) = sample {
                image.set(x, y, s);
                valid.set(x, y, true);
            }
        }
    }
    Ok(WarpedImage { image, valid })
}
