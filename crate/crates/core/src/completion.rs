//! Fill-only neighborhood completion of sparse BEV rasters.
//!
//! Each iteration looks at every nodata pixel; if its `kernel x kernel`
//! neighborhood holds at least one masked pixel, the pixel takes the
//! channel-wise maximum of those neighbors for RGB and altitude and a label
//! chosen by [`LabelStrategy`]. Updates are double-buffered, so an iteration
//! only ever reads the previous iteration's rasters. Pixels that were masked
//! on input are never written.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::projection::RasterSet;
#[allow(unused_imports)]
use crate::par::prelude::*;
use crate::{par_range, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelStrategy {
    /// Most frequent neighbor label, ties to the lowest class id.
    #[default]
    Majority,
    /// Numerically largest neighbor label (a plain max-pool on the label map).
    MaxId,
}

impl fmt::Display for LabelStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelStrategy::Majority => "majority",
            LabelStrategy::MaxId => "max-id",
        })
    }
}

impl FromStr for LabelStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "majority" => Ok(LabelStrategy::Majority),
            "max-id" => Ok(LabelStrategy::MaxId),
            other => Err(Error::Config(format!(
                "unknown label strategy {other:?} (expected majority or max-id)"
            ))),
        }
    }
}

fn check_kernel(kernel: u32) -> Result<u32> {
    if kernel < 3 || kernel.is_multiple_of(2) {
        return Err(Error::Config(format!("kernel must be odd and >= 3, got {kernel}")));
    }
    Ok(kernel / 2)
}

struct Fill {
    offset: usize,
    rgb: [u8; 3],
    alt: f64,
    label: u8,
}

fn fill_row(r: &RasterSet, y: u32, radius: u32, strategy: LabelStrategy) -> Vec<Fill> {
    let mut fills = Vec::new();
    let (w, h) = (r.width, r.height);
    let y0 = y.saturating_sub(radius);
    let y1 = (y + radius).min(h - 1);
    let mut votes: Vec<(u8, u32)> = Vec::with_capacity(((2 * radius + 1) * (2 * radius + 1)) as usize);
    for x in 0..w {
        let o = r.offset(x, y);
        if r.mask[o] {
            continue;
        }
        let x0 = x.saturating_sub(radius);
        let x1 = (x + radius).min(w - 1);
        let mut rgb = [0u8; 3];
        let mut alt = f64::NEG_INFINITY;
        let mut found = false;
        votes.clear();
        let mut max_label = 0u8;
        for ny in y0..=y1 {
            for nx in x0..=x1 {
                let n = r.offset(nx, ny);
                if !r.mask[n] {
                    continue;
                }
                found = true;
                for (acc, &v) in rgb.iter_mut().zip(&r.rgb[n]) {
                    *acc = (*acc).max(v);
                }
                alt = alt.max(r.alt[n]);
                let l = r.label[n];
                match votes.iter_mut().find(|(id, _)| *id == l) {
                    Some((_, c)) => *c += 1,
                    None => votes.push((l, 1)),
                }
                max_label = max_label.max(r.label[n]);
            }
        }
        if !found {
            continue;
        }
        let label = match strategy {
            LabelStrategy::MaxId => max_label,
            LabelStrategy::Majority => {
                let mut best = votes[0];
                for &(id, c) in &votes[1..] {
                    if c > best.1 || (c == best.1 && id < best.0) {
                        best = (id, c);
                    }
                }
                best.0
            }
        };
        fills.push(Fill {
            offset: o,
            rgb,
            alt,
            label,
        });
    }
    fills
}

/// Runs `iterations` synchronous completion passes.
pub fn complete(raster: &RasterSet, iterations: u32, kernel: u32, strategy: LabelStrategy) -> Result<RasterSet> {
    let radius = check_kernel(kernel)?;
    let mut cur = raster.clone();
    if cur.is_empty() {
        return Ok(cur);
    }
    for _ in 0..iterations {
        let rows: Vec<Vec<Fill>> = par_range!(0..cur.height)
            .map(|y| fill_row(&cur, y, radius, strategy))
            .collect();
        let mut changed = false;
        for f in rows.into_iter().flatten() {
            changed = true;
            cur.mask[f.offset] = true;
            cur.rgb[f.offset] = f.rgb;
            cur.alt[f.offset] = f.alt;
            cur.label[f.offset] = f.label;
        }
        if !changed {
            break;
        }
    }
    Ok(cur)
}

/// Chessboard (Chebyshev) distance from every pixel to the nearest masked
/// pixel, by a two-pass chamfer sweep. `None` when nothing is masked.
pub fn chebyshev_distance(raster: &RasterSet) -> Option<Vec<u32>> {
    if !raster.mask.iter().any(|&m| m) {
        return None;
    }
    let (w, h) = (raster.width as usize, raster.height as usize);
    let inf = u32::MAX / 2;
    let mut d: Vec<u32> = raster.mask.iter().map(|&m| if m { 0 } else { inf }).collect();
    for y in 0..h {
        for x in 0..w {
            let mut best = d[y * w + x];
            if x > 0 {
                best = best.min(d[y * w + x - 1] + 1);
            }
            if y > 0 {
                let up = (y - 1) * w;
                best = best.min(d[up + x] + 1);
                if x > 0 {
                    best = best.min(d[up + x - 1] + 1);
                }
                if x + 1 < w {
                    best = best.min(d[up + x + 1] + 1);
                }
            }
            d[y * w + x] = best;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let mut best = d[y * w + x];
            if x + 1 < w {
                best = best.min(d[y * w + x + 1] + 1);
            }
            if y + 1 < h {
                let down = (y + 1) * w;
                best = best.min(d[down + x] + 1);
                if x > 0 {
                    best = best.min(d[down + x - 1] + 1);
                }
                if x + 1 < w {
                    best = best.min(d[down + x + 1] + 1);
                }
            }
            d[y * w + x] = best;
        }
    }
    Some(d)
}

/// Smallest iteration count after which completion leaves no nodata pixel.
pub fn fixpoint_iterations(raster: &RasterSet, kernel: u32) -> Result<u32> {
    let radius = check_kernel(kernel)?;
    let d = chebyshev_distance(raster).ok_or_else(|| Error::Empty("raster has no masked pixels".into()))?;
    let max = d.into_iter().max().unwrap_or(0);
    Ok(max.div_ceil(radius))
}
