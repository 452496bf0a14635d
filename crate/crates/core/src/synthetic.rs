//! Procedural multi-view scenes with exact ground truth.
//!
//! A scene is a set of textured planes `z = z0 + sx·X + sy·Y` (optionally
//! bounded in X/Y) seen by pinhole cameras. Images are ray-traced with
//! supersampling and rounded to integer intensities so that they survive a
//! PNG round trip unchanged.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fusion::PointCloud;
use crate::geometry::{CameraView, Pixel};
use crate::io::cam::{write_cam, CamFile, DEFAULT_DEPTH_NUM};
use crate::io::image::write_png;
use crate::io::pair::{write_pair, Neighbor, PairList};
use crate::io::pfm::write_pfm_file;
use crate::io::ply::write_ply_file;
use crate::io::scene::{view_name, write_sparse};
use crate::prior::PriorMap;
use crate::raster::{DepthMap, Grid, RgbImage};
use crate::rng::stream_rng;

/// Axis-aligned rectangle in world X/Y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub z0: f64,
    pub slope: (f64, f64),
    pub extent: Option<Rect>,
    /// Region painted a constant color.
    pub flat: Option<Rect>,
}

impl Plane {
    pub fn fronto(z0: f64) -> Self {
        Self {
            z0,
            slope: (0.0, 0.0),
            extent: None,
            flat: None,
        }
    }

    /// Ray parameter of the hit, if any, for `origin + t·dir` with t > 0.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let (sx, sy) = self.slope;
        let denom = dir.z - sx * dir.x - sy * dir.y;
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (self.z0 + sx * origin.x + sy * origin.y - origin.z) / denom;
        if !(t > 0.0) {
            return None;
        }
        let p = origin + dir * t;
        match self.extent {
            Some(r) if !r.contains(p.x, p.y) => None,
            _ => Some(t),
        }
    }
}

/// Sum of random sinusoids per color channel over world X/Y.
#[derive(Debug, Clone)]
struct Texture {
    waves: [Vec<(f64, f64, f64, f64)>; 3],
}

impl Texture {
    fn random<R: Rng>(rng: &mut R) -> Self {
        let mut channel = || {
            (0..8)
                .map(|_| {
                    let wavelength = rng.random_range(0.2..1.2);
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    let k = std::f64::consts::TAU / wavelength;
                    (k * angle.cos(), k * angle.sin(), rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(6.0..16.0))
                })
                .collect::<Vec<_>>()
        };
        Self {
            waves: [channel(), channel(), channel()],
        }
    }

    fn color(&self, x: f64, y: f64) -> [f64; 3] {
        self.waves.clone().map(|w| {
            128.0 + w.iter().map(|(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin()).sum::<f64>()
        })
    }
}

const FLAT_COLOR: [f64; 3] = [140.0, 140.0, 140.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub depth_range: (f64, f64),
    pub centers: Vec<[f64; 3]>,
    /// Every camera looks at this point.
    pub target: [f64; 3],
    pub planes: Vec<Plane>,
    pub texture_seed: u64,
    /// Rays per pixel along each axis.
    pub supersample: usize,
}

impl SceneSpec {
    /// Slanted background, a bounded fronto-parallel foreground plane, and
    /// `num_views` cameras: one at the origin, the rest on a circle around it.
    pub fn two_planes(num_views: usize, seed: u64) -> Self {
        let centers = (0..num_views)
            .map(|i| {
                if i == 0 {
                    [0.0, 0.0, 0.0]
                } else {
                    let a = std::f64::consts::TAU * (i - 1) as f64 / (num_views - 1) as f64;
                    [0.5 * a.cos(), 0.4 * a.sin(), 0.0]
                }
            })
            .collect();
        Self {
            width: 128,
            height: 96,
            focal: 128.0,
            depth_range: (2.0, 8.0),
            centers,
            target: [0.0, 0.0, 5.0],
            planes: vec![
                Plane {
                    z0: 6.0,
                    slope: (0.15, 0.05),
                    extent: None,
                    flat: None,
                },
                Plane {
                    z0: 3.5,
                    slope: (0.0, 0.0),
                    extent: Some(Rect {
                        x_min: -0.8,
                        x_max: 0.5,
                        y_min: -0.6,
                        y_max: 0.5,
                    }),
                    flat: None,
                },
            ],
            texture_seed: seed,
            supersample: 3,
        }
    }

    /// Same as [`two_planes`](Self::two_planes) with a constant-color patch on
    /// the background, visible beside the foreground plane.
    pub fn two_planes_with_flat_patch(num_views: usize, seed: u64) -> Self {
        let mut s = Self::two_planes(num_views, seed);
        s.planes[0].flat = Some(Rect {
            x_min: 1.0,
            x_max: 2.2,
            y_min: -0.9,
            y_max: 0.9,
        });
        s
    }

    /// One textured fronto-parallel plane filling the view.
    pub fn single_plane(num_views: usize, depth: f64, seed: u64) -> Self {
        let mut s = Self::two_planes(num_views, seed);
        s.planes = vec![Plane::fronto(depth)];
        s
    }
}

fn look_at(center: Vector3<f64>, target: Vector3<f64>) -> Matrix3<f64> {
    let z = (target - center).normalize();
    let x = Vector3::new(0.0, 1.0, 0.0).cross(&z).normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub cameras: Vec<CameraView>,
    pub images: Vec<RgbImage>,
    /// Ground-truth depth at pixel centers; misses are invalid.
    pub depths: Vec<DepthMap>,
}

/// Options for a synthetic depth prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorStyle {
    /// Exponent of a monotone warp applied to the exact prior.
    pub gamma: f64,
    /// Standard deviation of additive Gaussian noise before renormalization.
    pub noise: f64,
    pub seed: u64,
}

impl PriorStyle {
    /// Normalized ground-truth inverse depth, affine in inverse depth.
    pub const EXACT: PriorStyle = PriorStyle {
        gamma: 1.0,
        noise: 0.0,
        seed: 0,
    };
}

impl SyntheticScene {
    pub fn render(spec: SceneSpec) -> Result<Self> {
        if spec.centers.is_empty() || spec.width == 0 || spec.height == 0 || spec.supersample == 0 {
            return Err(Error::InvalidArgument("scene needs views, pixels and rays".into()));
        }
        let target = Vector3::from(spec.target);
        let cameras = spec
            .centers
            .iter()
            .map(|c| {
                let c = Vector3::from(*c);
                CameraView::look(
                    spec.focal,
                    ((spec.width as f64 - 1.0) / 2.0, (spec.height as f64 - 1.0) / 2.0),
                    look_at(c, target),
                    c,
                    spec.depth_range,
                    (spec.width, spec.height),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let textures: Vec<Texture> = (0..spec.planes.len())
            .map(|i| Texture::random(&mut stream_rng(spec.texture_seed, i as u64)))
            .collect();
        let mut images = Vec::with_capacity(cameras.len());
        let mut depths = Vec::with_capacity(cameras.len());
        for cam in &cameras {
            let ss = spec.supersample;
            let image = Grid::from_fn(spec.width, spec.height, |x, y| {
                let mut acc = [0.0; 3];
                for j in 0..ss {
                    for i in 0..ss {
                        let u = x as f64 + (i as f64 + 0.5) / ss as f64 - 0.5;
                        let v = y as f64 + (j as f64 + 0.5) / ss as f64 - 0.5;
                        if let Some(c) = shade(&spec.planes, &textures, cam, Pixel::new(u, v)) {
                            acc.iter_mut().zip(c).for_each(|(a, c)| *a += c);
                        }
                    }
                }
                let n = (ss * ss) as f64;
                acc.map(|a| (a / n).round().clamp(0.0, 255.0) as f32)
            });
            let depth = Grid::from_fn(spec.width, spec.height, |x, y| {
                trace(&spec.planes, cam, Pixel::new(x as f64, y as f64)).map_or(0.0, |(_, _, d)| d as f32)
            });
            images.push(image);
            depths.push(DepthMap::from_values(depth));
        }
        Ok(Self {
            spec,
            cameras,
            images,
            depths,
        })
    }

    pub fn num_views(&self) -> usize {
        self.cameras.len()
    }

    /// Normalized inverse-depth prior for `view`, min-max scaled to [0, 1]
    /// over its valid pixels; invalid pixels get 0.
    pub fn prior(&self, view: usize, style: PriorStyle) -> Result<PriorMap> {
        let depth = &self.depths[view];
        let inv = depth.values().map(|&d| if d > 0.0 { 1.0 / d as f64 } else { f64::NAN });
        let (lo, hi) = min_max(inv.as_slice())?;
        let mut rng = stream_rng(style.seed, view as u64);
        let normal = Normal::new(0.0, style.noise.max(0.0))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let warped = inv.map(|&v| {
            if v.is_nan() {
                return f64::NAN;
            }
            let p = ((v - lo) / (hi - lo)).powf(style.gamma);
            if style.noise > 0.0 {
                p + normal.sample(&mut rng)
            } else {
                p
            }
        });
        let (lo, hi) = min_max(warped.as_slice())?;
        PriorMap::new(warped.map(|&p| if p.is_nan() { 0.0 } else { ((p - lo) / (hi - lo)) as f32 }))
    }

    /// World points of every view's pixel centers, traced analytically.
    pub fn gt_cloud(&self) -> PointCloud {
        let mut points = Vec::new();
        for cam in &self.cameras {
            for y in 0..self.spec.height {
                for x in 0..self.spec.width {
                    if let Some((p, _, _)) = trace(&self.spec.planes, cam, Pixel::new(x as f64, y as f64)) {
                        points.push([p.x, p.y, p.z]);
                    }
                }
            }
        }
        PointCloud {
            points,
            colors: None,
        }
    }

    /// `count` random valid pixels of `view` with their true depths.
    pub fn sparse_points<R: Rng>(&self, view: usize, count: usize, rng: &mut R) -> Vec<(Pixel, f64)> {
        let depth = &self.depths[view];
        let (w, h) = depth.dims();
        let mut out = Vec::with_capacity(count);
        let mut tries = 0;
        while out.len() < count && tries < count * 100 {
            tries += 1;
            let (x, y) = (rng.random_range(0..w), rng.random_range(0..h));
            if let Some(d) = depth.get(x, y) {
                out.push((Pixel::new(x as f64, y as f64), d as f64));
            }
        }
        out
    }

    /// Neighbors ranked by camera distance, scored 1/(1 + distance).
    pub fn pair_list(&self) -> PairList {
        let lists = (0..self.num_views())
            .map(|i| {
                let c = self.cameras[i].center();
                crate::synthesis::rank_neighbors(i, &self.cameras, None)
                    .into_iter()
                    .map(|j| Neighbor {
                        id: j,
                        score: (1.0 / (1.0 + (self.cameras[j].center() - c).norm())) as f32,
                    })
                    .collect()
            })
            .collect();
        PairList::new(lists).expect("neighbor ids are in range")
    }

    /// Writes the scene in the on-disk layout read by
    /// [`SceneLayout`](crate::io::SceneLayout), with ground truth.
    pub fn write(&self, root: &Path, with_pairs: bool) -> Result<()> {
        let mk = |d: &Path| std::fs::create_dir_all(d).map_err(|e| Error::io(d, e));
        for sub in ["images", "cams", "depths", "sparse"] {
            mk(&root.join(sub))?;
        }
        for (i, cam) in self.cameras.iter().enumerate() {
            let name = view_name(i);
            write_png(&root.join("images").join(format!("{name}.png")), &self.images[i])?;
            let cam_path = root.join("cams").join(format!("{name}_cam.txt"));
            std::fs::write(&cam_path, write_cam(&CamFile::from_view(cam, DEFAULT_DEPTH_NUM)))
                .map_err(|e| Error::io(&cam_path, e))?;
            write_pfm_file(&root.join("depths").join(format!("{name}.pfm")), self.depths[i].values())?;
            let sparse = self.sparse_points(i, 200, &mut stream_rng(self.spec.texture_seed, 1000 + i as u64));
            let sparse_path = root.join("sparse").join(format!("{name}.txt"));
            std::fs::write(&sparse_path, write_sparse(&sparse)).map_err(|e| Error::io(&sparse_path, e))?;
        }
        if with_pairs {
            let p = root.join("pair.txt");
            std::fs::write(&p, write_pair(&self.pair_list())).map_err(|e| Error::io(&p, e))?;
        }
        write_ply_file(&root.join("gt.ply"), &self.gt_cloud())
    }

    /// Writes one prior PFM per view into `dir`.
    pub fn write_priors(&self, dir: &Path, style: PriorStyle) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for i in 0..self.num_views() {
            write_pfm_file(&dir.join(format!("{}.pfm", view_name(i))), self.prior(i, style)?.values())?;
        }
        Ok(())
    }
}

fn min_max(values: &[f64]) -> Result<(f64, f64)> {
    let (lo, hi) = values
        .iter()
        .filter(|v| !v.is_nan())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(Error::NoValidPixels("prior needs at least two distinct depths".into()));
    }
    Ok((lo, hi))
}

/// Nearest hit: world point, plane index and camera-frame depth.
fn trace(planes: &[Plane], cam: &CameraView, pixel: Pixel) -> Option<(Vector3<f64>, usize, f64)> {
    let origin = cam.center();
    // camera-frame ray has unit z, so the ray parameter is the depth
    let dir = cam.rotation().transpose() * cam.ray(pixel);
    planes
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.intersect(&origin, &dir).map(|t| (t, i)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(t, i)| (origin + dir * t, i, t))
}

fn shade(planes: &[Plane], textures: &[Texture], cam: &CameraView, pixel: Pixel) -> Option<[f64; 3]> {
    let (p, i, _) = trace(planes, cam, pixel)?;
    match planes[i].flat {
        Some(r) if r.contains(p.x, p.y) => Some(FLAT_COLOR),
        _ => Some(textures[i].color(p.x, p.y)),
    }
}
