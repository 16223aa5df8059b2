//! On-disk window bundles and the projection manifest.
//!
//! Each window `cell{C}_win{X}_{Y}` is written as
//!
//! - `*_rgb.png`: 8-bit RGB
//! - `*_alt.png`: 16-bit gray, `round((z - z_min) / (z_max - z_min) * 65535)`,
//!   0 for nodata and for windows with `z_max == z_min`
//! - `*_label.png`: 8-bit gray class ids, 255 for nodata
//! - `*_mask.png`: 8-bit gray, 255 where a point landed
//! - `*_meta.json`: the [`WindowMeta`]
//!
//! alongside a `manifest.json` holding every window and the projection config.
//! Winner indices are not exported.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageBuffer, Luma, RgbImage};

use crate::classes::UNLABELED;
use crate::projection::{Manifest, Projection, RasterSet, WindowMeta, NO_WINNER};
#[allow(unused_imports)]
use crate::par::prelude::*;
use crate::{par_iter, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

fn img_err(path: &Path, e: image::ImageError) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn encode_alt(z: f64, z_min: f64, z_max: f64) -> u16 {
    if z_max > z_min {
        ((z - z_min) / (z_max - z_min) * 65535.0).round().clamp(0.0, 65535.0) as u16
    } else {
        0
    }
}

pub fn decode_alt(v: u16, z_min: f64, z_max: f64) -> f64 {
    if z_max > z_min {
        z_min + v as f64 / 65535.0 * (z_max - z_min)
    } else {
        z_min
    }
}

fn part(dir: &Path, stem: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{stem}_{suffix}"))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes the five files of one bundle under `dir` with file stem `stem`.
pub fn write_bundle(dir: &Path, stem: &str, meta: &WindowMeta, raster: &RasterSet) -> Result<()> {
    let (w, h) = (raster.width, raster.height);
    let (z_min, z_max) = (meta.z_min.unwrap_or(0.0), meta.z_max.unwrap_or(0.0));

    let rgb = RgbImage::from_fn(w, h, |x, y| image::Rgb(raster.rgb[raster.offset(x, y)]));
    let alt: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w, h, |x, y| {
        let o = raster.offset(x, y);
        Luma([if raster.mask[o] {
            encode_alt(raster.alt[o], z_min, z_max)
        } else {
            0
        }])
    });
    let label = GrayImage::from_fn(w, h, |x, y| Luma([raster.label[raster.offset(x, y)]]));
    let mask = GrayImage::from_fn(w, h, |x, y| Luma([if raster.mask[raster.offset(x, y)] { 255 } else { 0 }]));

    let p = part(dir, stem, "rgb.png");
    rgb.save(&p).map_err(|e| img_err(&p, e))?;
    let p = part(dir, stem, "alt.png");
    alt.save(&p).map_err(|e| img_err(&p, e))?;
    let p = part(dir, stem, "label.png");
    label.save(&p).map_err(|e| img_err(&p, e))?;
    let p = part(dir, stem, "mask.png");
    mask.save(&p).map_err(|e| img_err(&p, e))?;
    write_json(&part(dir, stem, "meta.json"), meta)
}

/// Reads a bundle back into a [`RasterSet`]. Altitudes are decoded from the
/// 16-bit raster; winner indices are not stored and come back as
/// [`NO_WINNER`].
pub fn read_bundle(dir: &Path, stem: &str) -> Result<(WindowMeta, RasterSet)> {
    let meta: WindowMeta = read_json(&part(dir, stem, "meta.json"))?;
    let open = |suffix: &str| -> Result<image::DynamicImage> {
        let p = part(dir, stem, suffix);
        image::open(&p).map_err(|e| img_err(&p, e))
    };
    let rgb = open("rgb.png")?.into_rgb8();
    let alt = open("alt.png")?.into_luma16();
    let label = open("label.png")?.into_luma8();
    let mask = open("mask.png")?.into_luma8();
    let (w, h) = (meta.width_px, meta.height_px);
    for (name, dims) in [
        ("rgb", rgb.dimensions()),
        ("alt", alt.dimensions()),
        ("label", label.dimensions()),
        ("mask", mask.dimensions()),
    ] {
        if dims != (w, h) {
            return Err(Error::Format {
                path: part(dir, stem, &format!("{name}.png")),
                reason: format!("size {}x{} does not match meta {w}x{h}", dims.0, dims.1),
            });
        }
    }
    let (z_min, z_max) = (meta.z_min.unwrap_or(0.0), meta.z_max.unwrap_or(0.0));
    let mut r = RasterSet::nodata(w, h);
    for y in 0..h {
        for x in 0..w {
            let o = r.offset(x, y);
            let m = mask.get_pixel(x, y)[0] != 0;
            r.mask[o] = m;
            r.rgb[o] = rgb.get_pixel(x, y).0;
            r.label[o] = label.get_pixel(x, y)[0];
            if m {
                r.alt[o] = decode_alt(alt.get_pixel(x, y)[0], z_min, z_max);
            } else {
                r.label[o] = UNLABELED;
            }
            r.winner_index[o] = NO_WINNER;
        }
    }
    Ok((meta, r))
}

/// Reads an 8-bit label raster as `(width, height, labels)`.
pub fn read_label_png(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let img = image::open(path).map_err(|e| img_err(path, e))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: format!("expected 8-bit grayscale label raster, got {:?}", other.color()),
            })
        }
    };
    let (w, h) = gray.dimensions();
    Ok((w, h, gray.into_raw()))
}

pub fn write_label_png(path: &Path, width: u32, height: u32, labels: &[u8]) -> Result<()> {
    let img = GrayImage::from_raw(width, height, labels.to_vec()).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        reason: format!("{} labels do not fill {width}x{height}", labels.len()),
    })?;
    img.save(path).map_err(|e| img_err(path, e))
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

/// Reads `manifest.json` from a bundle directory or from an explicit path.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let file = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    read_json(&file)
}

/// Writes every window bundle plus `manifest.json` into `dir`.
pub fn write_projection(dir: &Path, projection: &Projection, jobs: Option<usize>) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let results: Vec<Result<()>> = crate::par::with_jobs(jobs, || {
        par_iter!(projection.windows)
            .map(|w| write_bundle(dir, &w.meta.name(), &w.meta, &w.raster))
            .collect()
    });
    results.into_iter().collect::<Result<Vec<_>>>()?;
    let manifest = projection.manifest();
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}
