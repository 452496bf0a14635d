//! On-disk scene layout:
//!
//! ```text
//! <scene>/images/00000000.png        reference images (PNG or binary PPM)
//! <scene>/cams/00000000_cam.txt      cam files
//! <scene>/pair.txt                   optional ranked neighbors
//! <scene>/sparse/00000000.txt        optional sparse points, "u v depth" per line
//! <scene>/depths/00000000.pfm        optional ground-truth depth
//! <scene>/gt.ply                     optional ground-truth cloud
//! <priors>/00000000.pfm              optional normalized inverse-depth priors
//! ```
//!
//! View ids are the numeric image stems and must be dense from 0.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{CameraView, Pixel};
use crate::io::cam::parse_cam;
use crate::io::image::read_image;
use crate::io::pair::{parse_pair, PairList};
use crate::io::pfm::read_pfm_file;
use crate::prior::PriorMap;
use crate::raster::{DepthMap, RgbImage};

pub fn view_name(id: usize) -> String {
    format!("{id:08}")
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct ViewFiles {
    pub image: PathBuf,
    pub cam: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SceneLayout {
    pub root: PathBuf,
    pub views: Vec<ViewFiles>,
    pub pairs: Option<PairList>,
    pub prior_paths: Vec<Option<PathBuf>>,
}

fn existing(path: PathBuf) -> Option<PathBuf> {
    path.is_file().then_some(path)
}

impl SceneLayout {
    pub fn open(root: &Path, priors_dir: Option<&Path>) -> Result<Self> {
        let image_dir = root.join("images");
        let entries = std::fs::read_dir(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
        let mut found: Vec<(usize, PathBuf)> = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&image_dir, e))?.path();
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase);
            if !matches!(ext.as_deref(), Some("png" | "ppm")) {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) else {
                continue;
            };
            found.push((id, path));
        }
        found.sort();
        if found.is_empty() {
            return Err(Error::Format(format!("no images in {}", image_dir.display())));
        }
        for (expect, (id, path)) in found.iter().enumerate() {
            if *id != expect {
                return Err(Error::Format(format!(
                    "view ids must be dense from 0; expected {expect}, found {} ({})",
                    id,
                    path.display()
                )));
            }
        }
        let views = found
            .into_iter()
            .map(|(id, image)| {
                let cam = root.join("cams").join(format!("{}_cam.txt", view_name(id)));
                if !cam.is_file() {
                    return Err(Error::Format(format!("missing cam file {}", cam.display())));
                }
                Ok(ViewFiles { image, cam })
            })
            .collect::<Result<Vec<_>>>()?;
        let pair_path = root.join("pair.txt");
        let pairs = match existing(pair_path.clone()) {
            Some(p) => {
                let pairs = parse_pair(&read_text(&p)?).map_err(|e| with_file(e, &p))?;
                if pairs.num_views() != views.len() {
                    return Err(Error::Format(format!(
                        "{} lists {} views but the scene has {}",
                        p.display(),
                        pairs.num_views(),
                        views.len()
                    )));
                }
                Some(pairs)
            }
            None => None,
        };
        // prior files mirror image stems
        let prior_paths = views
            .iter()
            .map(|v| {
                let stem = v.image.file_stem().expect("image paths have stems");
                priors_dir.and_then(|d| existing(d.join(stem).with_extension("pfm")))
            })
            .collect();
        Ok(Self {
            root: root.to_path_buf(),
            views,
            pairs,
            prior_paths,
        })
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn load_image(&self, id: usize) -> Result<RgbImage> {
        read_image(&self.views[id].image)
    }

    pub fn image_size(&self, id: usize) -> Result<(usize, usize)> {
        let path = &self.views[id].image;
        let (w, h) = image::image_dimensions(path).map_err(|e| Error::Image {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok((w as usize, h as usize))
    }

    pub fn load_camera(&self, id: usize) -> Result<CameraView> {
        let path = &self.views[id].cam;
        let file = parse_cam(&read_text(path)?).map_err(|e| with_file(e, path))?;
        file.to_view(self.image_size(id)?).map_err(|e| with_file(e, path))
    }

    pub fn load_cameras(&self) -> Result<Vec<CameraView>> {
        (0..self.num_views()).map(|id| self.load_camera(id)).collect()
    }

    /// `Ok(None)` when no prior file exists for the view.
    pub fn load_prior(&self, id: usize) -> Result<Option<PriorMap>> {
        match &self.prior_paths[id] {
            Some(p) => PriorMap::new(read_pfm_file(p)?).map(Some).map_err(|e| with_file(e, p)),
            None => Ok(None),
        }
    }

    pub fn load_sparse(&self, id: usize) -> Result<Option<Vec<(Pixel, f64)>>> {
        let path = self.root.join("sparse").join(format!("{}.txt", view_name(id)));
        if !path.is_file() {
            return Ok(None);
        }
        parse_sparse(&read_text(&path)?).map(Some).map_err(|e| with_file(e, &path))
    }

    pub fn load_gt_depth(&self, id: usize) -> Result<Option<DepthMap>> {
        match existing(self.root.join("depths").join(format!("{}.pfm", view_name(id)))) {
            Some(p) => Ok(Some(DepthMap::from_values(read_pfm_file(&p)?))),
            None => Ok(None),
        }
    }

    pub fn gt_cloud_path(&self) -> Option<PathBuf> {
        existing(self.root.join("gt.ply"))
    }
}

fn with_file(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Io { .. } | Error::Image { .. } => e,
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// Sparse observations, one `u v depth` triple per line; `#` starts a comment.
pub fn parse_sparse(text: &str) -> Result<Vec<(Pixel, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(i + 1, format!("invalid number '{t}'"))))
            .collect::<Result<_>>()?;
        if vals.len() != 3 || vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(i + 1, "expected three finite numbers 'u v depth'"));
        }
        out.push((Pixel::new(vals[0], vals[1]), vals[2]));
    }
    Ok(out)
}

pub fn write_sparse(points: &[(Pixel, f64)]) -> String {
    points
        .iter()
        .map(|(p, d)| format!("{} {} {}\n", p.u, p.v, d))
        .collect()
}
