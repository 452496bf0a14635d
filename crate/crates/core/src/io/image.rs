//! PNG and binary PPM image input, PNG output.

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{Grid, RgbImage};

fn image_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn read_image(path: &Path) -> Result<RgbImage> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let format = match ext.as_str() {
        "png" => image::ImageFormat::Png,
        "ppm" | "pnm" => image::ImageFormat::Pnm,
        _ => return Err(image_err(path, "only PNG and binary PPM images are supported")),
    };
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| image_err(path, e))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| [p[0] as f32, p[1] as f32, p[2] as f32])
        .collect();
    Grid::from_vec(w, h, data)
}

#[inline]
fn to_u8(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

pub fn rgb_to_bytes(image: &RgbImage) -> Vec<u8> {
    image.as_slice().iter().flat_map(|c| c.map(to_u8)).collect()
}

pub fn write_png(path: &Path, image: &RgbImage) -> Result<()> {
    let (w, h) = image.dims();
    let buf = image::RgbImage::from_raw(w as u32, h as u32, rgb_to_bytes(image))
        .ok_or_else(|| image_err(path, "buffer size mismatch"))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

pub fn write_png_gray(path: &Path, image: &Grid<u8>) -> Result<()> {
    let (w, h) = image.dims();
    let buf = image::GrayImage::from_raw(w as u32, h as u32, image.as_slice().to_vec())
        .ok_or_else(|| image_err(path, "buffer size mismatch"))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

pub fn read_png_gray(path: &Path) -> Result<Grid<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Grid::from_vec(w, h, img.into_raw())
}
