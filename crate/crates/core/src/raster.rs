//! Dense row-major rasters and the typed maps built on them.

use crate::error::{Error, Result};

/// Sample coordinates closer than this to an integer are snapped onto it, so
/// that identity warps reproduce the source exactly.
const SNAP_EPS: f64 = 1e-9;

/// Row-major H×W grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "grid of {width}x{height} needs {} elements, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }
}

/// Single-channel intensity image, 0..255 scale.
pub type GrayImage = Grid<f32>;

/// Three-channel color image, 0..255 scale per channel.
pub type RgbImage = Grid<[f32; 3]>;

/// Rec. 601 luma.
pub fn to_gray(image: &RgbImage) -> GrayImage {
    image.map(|c| 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2])
}

/// Integer footprint of a bilinear sample: corner indices and fractional weights.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Footprint {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub fx: f32,
    pub fy: f32,
}

#[inline]
fn snap(c: f64) -> f64 {
    let r = c.round();
    if (c - r).abs() < SNAP_EPS {
        r
    } else {
        c
    }
}

/// Returns `None` when any part of the 2×2 footprint lies outside the image.
#[inline]
pub(crate) fn footprint(width: usize, height: usize, u: f64, v: f64) -> Option<Footprint> {
    if width == 0 || height == 0 || !u.is_finite() || !v.is_finite() {
        return None;
    }
    let u = snap(u);
    let v = snap(v);
    if u < 0.0 || v < 0.0 || u > (width - 1) as f64 || v > (height - 1) as f64 {
        return None;
    }
    let x0 = u.floor() as usize;
    let y0 = v.floor() as usize;
    Some(Footprint {
        x0,
        y0,
        x1: (x0 + 1).min(width - 1),
        y1: (y0 + 1).min(height - 1),
        fx: (u - x0 as f64) as f32,
        fy: (v - y0 as f64) as f32,
    })
}

#[inline]
fn lerp2(f: &Footprint, a: f32, b: f32, c: f32, d: f32) -> f32 {
    let top = if f.fx == 0.0 { a } else { a * (1.0 - f.fx) + b * f.fx };
    let bottom = if f.fx == 0.0 { c } else { c * (1.0 - f.fx) + d * f.fx };
    if f.fy == 0.0 {
        top
    } else {
        top * (1.0 - f.fy) + bottom * f.fy
    }
}

/// Bilinear sample of a scalar grid; `None` if the footprint exits the image.
#[inline]
pub fn sample_bilinear(grid: &GrayImage, u: f64, v: f64) -> Option<f32> {
    let f = footprint(grid.width, grid.height, u, v)?;
    Some(lerp2(
        &f,
        *grid.get(f.x0, f.y0),
        *grid.get(f.x1, f.y0),
        *grid.get(f.x0, f.y1),
        *grid.get(f.x1, f.y1),
    ))
}

/// Bilinear sample of a color grid.
pub fn sample_bilinear_rgb(grid: &RgbImage, u: f64, v: f64) -> Option<[f32; 3]> {
    let f = footprint(grid.width, grid.height, u, v)?;
    let (a, b, c, d) = (
        grid.get(f.x0, f.y0),
        grid.get(f.x1, f.y0),
        grid.get(f.x0, f.y1),
        grid.get(f.x1, f.y1),
    );
    Some(std::array::from_fn(|k| lerp2(&f, a[k], b[k], c[k], d[k])))
}

/// Bilinear resampling to a new resolution, aligning pixel-center grids.
pub fn resize_bilinear(grid: &GrayImage, width: usize, height: usize) -> GrayImage {
    if grid.dims() == (width, height) {
        return grid.clone();
    }
    let sx = grid.width as f64 / width as f64;
    let sy = grid.height as f64 / height as f64;
    let max_u = grid.width.saturating_sub(1) as f64;
    let max_v = grid.height.saturating_sub(1) as f64;
    Grid::from_fn(width, height, |x, y| {
        let u = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_u);
        let v = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_v);
        sample_bilinear(grid, u, v).unwrap_or(0.0)
    })
}

/// Halves resolution by 2×2 box averaging (odd trailing row/column dropped).
pub fn downsample2(grid: &GrayImage) -> GrayImage {
    let w = grid.width / 2;
    let h = grid.height / 2;
    Grid::from_fn(w, h, |x, y| {
        let (x2, y2) = (2 * x, 2 * y);
        0.25 * (grid.get(x2, y2) + grid.get(x2 + 1, y2) + grid.get(x2, y2 + 1) + grid.get(x2 + 1, y2 + 1))
    })
}

/// Metric depth raster with a validity mask. Invalid pixels keep whatever raw
/// value they were loaded with so that untouched maps re-serialize unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    values: Grid<f32>,
    valid: Grid<bool>,
}

impl DepthMap {
    /// Validity is inferred: a pixel is valid iff its value is finite and > 0.
    pub fn from_values(values: Grid<f32>) -> Self {
        let valid = values.map(|&d| d.is_finite() && d > 0.0);
        Self { values, valid }
    }

    pub fn from_parts(values: Grid<f32>, valid: Grid<bool>) -> Result<Self> {
        values.same_dims(&valid)?;
        for (d, &ok) in values.as_slice().iter().zip(valid.as_slice()) {
            if ok && !(d.is_finite() && *d > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "valid depth must be finite and positive, got {d}"
                )));
            }
        }
        Ok(Self { values, valid })
    }

    /// All pixels invalid, value 0.
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            values: Grid::filled(width, height, 0.0),
            valid: Grid::filled(width, height, false),
        }
    }

    pub fn constant(width: usize, height: usize, depth: f32) -> Self {
        Self::from_values(Grid::filled(width, height, depth))
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        if *self.valid.get(x, y) {
            Some(*self.values.get(x, y))
        } else {
            None
        }
    }

    #[inline]
    pub fn raw(&self, x: usize, y: usize) -> f32 {
        *self.values.get(x, y)
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        *self.valid.get(x, y)
    }

    /// Sets a valid depth; non-finite or non-positive values invalidate the pixel.
    pub fn set(&mut self, x: usize, y: usize, depth: f32) {
        if depth.is_finite() && depth > 0.0 {
            self.values.set(x, y, depth);
            self.valid.set(x, y, true);
        } else {
            self.invalidate(x, y);
        }
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        self.values.set(x, y, 0.0);
        self.valid.set(x, y, false);
    }

    /// Copies value and validity bit-exactly from `other`.
    pub(crate) fn copy_pixel(&mut self, other: &DepthMap, x: usize, y: usize) {
        self.values.set(x, y, other.raw(x, y));
        self.valid.set(x, y, other.is_valid(x, y));
    }

    pub fn values(&self) -> &Grid<f32> {
        &self.values
    }

    pub fn valid_mask(&self) -> &Grid<bool> {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|&&v| v).count()
    }

    /// Bilinear depth lookup that requires every contributing neighbor to be valid.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<f32> {
        let f = footprint(self.width(), self.height(), u, v)?;
        // zero-weight corners do not contribute and need not be valid
        let x1 = if f.fx == 0.0 { f.x0 } else { f.x1 };
        let y1 = if f.fy == 0.0 { f.y0 } else { f.y1 };
        let corners = [(f.x0, f.y0), (x1, f.y0), (f.x0, y1), (x1, y1)];
        if corners.iter().any(|&(x, y)| !self.is_valid(x, y)) {
            return None;
        }
        let d = lerp2(
            &f,
            self.raw(f.x0, f.y0),
            self.raw(f.x1, f.y0),
            self.raw(f.x0, f.y1),
            self.raw(f.x1, f.y1),
        );
        Some(d)
    }

    /// Bilinear interpolation of inverse depth, returned as depth. Exact on
    /// planar surfaces, whose inverse depth is affine in pixel coordinates.
    /// Every contributing neighbor must be valid.
    pub fn sample_inverse_bilinear(&self, u: f64, v: f64) -> Option<f64> {
        let f = footprint(self.width(), self.height(), u, v)?;
        let x1 = if f.fx == 0.0 { f.x0 } else { f.x1 };
        let y1 = if f.fy == 0.0 { f.y0 } else { f.y1 };
        let corners = [(f.x0, f.y0), (x1, f.y0), (f.x0, y1), (x1, y1)];
        if corners.iter().any(|&(x, y)| !self.is_valid(x, y)) {
            return None;
        }
        let (fx, fy) = (snap(u) - f.x0 as f64, snap(v) - f.y0 as f64);
        let inv = |x: usize, y: usize| 1.0 / self.raw(x, y) as f64;
        let top = inv(f.x0, f.y0) * (1.0 - fx) + inv(x1, f.y0) * fx;
        let bottom = inv(f.x0, y1) * (1.0 - fx) + inv(x1, y1) * fx;
        Some(1.0 / (top * (1.0 - fy) + bottom * fy))
    }

    /// Nearest-neighbor decimation by `factor`: output pixel (x, y) takes input
    /// pixel (x·factor, y·factor).
    pub fn downsample_nearest(&self, factor: usize) -> DepthMap {
        assert!(factor >= 1);
        let w = self.width() / factor;
        let h = self.height() / factor;
        let values = Grid::from_fn(w, h, |x, y| self.raw(x * factor, y * factor));
        let valid = Grid::from_fn(w, h, |x, y| self.is_valid(x * factor, y * factor));
        DepthMap { values, valid }
    }
}

/// Per-pixel photometric confidence in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    values: Grid<f32>,
}

impl ConfidenceMap {
    pub fn new(values: Grid<f32>) -> Result<Self> {
        if let Some(bad) = values
            .as_slice()
            .iter()
            .find(|c| !(c.is_finite() && (0.0..=1.0).contains(*c)))
        {
            return Err(Error::InvalidArgument(format!(
                "confidence must lie in [0, 1], got {bad}"
            )));
        }
        Ok(Self { values })
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        Self::new(Grid::filled(width, height, value)).expect("constant confidence out of range")
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

    pub fn into_grid(self) -> Grid<f32> {
        self.values
    }
}
