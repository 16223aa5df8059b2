//! Grid partition, sliding windows and top-z rasterization.
//!
//! A cloud's bounding box is tiled into grid cells of `cell_side` meters.
//! Each cell is covered by square windows of `g_size` meters placed every
//! `g_step` meters from the cell origin. Every window is rasterized at
//! `g_scale` meters per pixel, keeping for each pixel only the highest point.
//!
//! All intervals are half-open: a cell or window owns `[origin, origin +
//! side)`. The one exception is the far edge of the whole map, where points
//! lying exactly on `max_x` / `max_y` clamp into the last cell, window and
//! pixel.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classes::UNLABELED;
use crate::io::{read_point_stream, Point};
#[allow(unused_imports)]
use crate::par::prelude::*;
use crate::{par_iter, par_range, Error, Result};

/// Sentinel stored in [`RasterSet::winner_index`] for nodata pixels.
pub const NO_WINNER: u64 = u64::MAX;

/// Relative tolerance for `g_size / g_scale` being a whole pixel count.
const PIXEL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    /// Meters per pixel.
    pub g_scale: f64,
    /// Window side length in meters.
    pub g_size: f64,
    /// Window stride in meters.
    pub g_step: f64,
    /// Grid cell side length in meters.
    pub cell_side: f64,
    pub completion_iterations: u32,
    /// Odd pixel width of the completion neighborhood.
    pub kernel: u32,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            g_scale: 0.05,
            g_size: 25.0,
            g_step: 25.0,
            cell_side: 400.0,
            completion_iterations: 3,
            kernel: 3,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.g_scale) {
            return bad(format!("g_scale must be positive, got {}", self.g_scale));
        }
        if !finite_pos(self.g_step) || !self.g_size.is_finite() || self.g_step > self.g_size {
            return bad(format!(
                "need 0 < g_step <= g_size, got g_step={} g_size={}",
                self.g_step, self.g_size
            ));
        }
        if !self.cell_side.is_finite() || self.cell_side < self.g_size {
            return bad(format!(
                "cell_side ({}) must be at least g_size ({})",
                self.cell_side, self.g_size
            ));
        }
        if self.kernel < 3 || self.kernel.is_multiple_of(2) {
            return bad(format!("kernel must be odd and >= 3, got {}", self.kernel));
        }
        let ratio = self.g_size / self.g_scale;
        if ratio.round() < 1.0 {
            return bad(format!("g_size / g_scale = {ratio} gives no pixels"));
        }
        if (ratio - ratio.round()).abs() > PIXEL_TOLERANCE * ratio.round() {
            return bad(format!(
                "g_size / g_scale = {ratio} is not a whole number of pixels"
            ));
        }
        Ok(())
    }

    pub fn pixels_per_side(&self) -> u32 {
        (self.g_size / self.g_scale).round() as u32
    }
}

/// Axis-aligned 2D bounds of a cloud, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn empty() -> Self {
        Bounds {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min_x > self.max_x
    }

    pub fn include(&mut self, x: f64, y: f64) {
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
    }

    pub fn of(points: &[Point]) -> Option<Bounds> {
        let mut b = Bounds::empty();
        for p in points {
            b.include(p.x, p.y);
        }
        (!b.is_empty()).then_some(b)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub cell_id: u64,
    pub ix: u32,
    pub iy: u32,
    pub x0: f64,
    pub y0: f64,
    /// Clipped to the map bounds.
    pub x1: f64,
    pub y1: f64,
    /// Cell touches the map's far x / y edge.
    pub last_x: bool,
    pub last_y: bool,
}

/// Number of cells needed along one axis.
fn cell_count(extent: f64, cell_side: f64) -> u32 {
    ((extent / cell_side).ceil() as u32).max(1)
}

/// Tiles `bounds` with square cells of `cell_side` meters, row-major by y.
pub fn partition_grid(bounds: &Bounds, cell_side: f64) -> Result<Vec<GridCell>> {
    if !(cell_side.is_finite() && cell_side > 0.0) {
        return Err(Error::Config(format!("cell_side must be positive, got {cell_side}")));
    }
    let w = bounds.max_x - bounds.min_x;
    let h = bounds.max_y - bounds.min_y;
    if !(w > 0.0 && h > 0.0) || !w.is_finite() || !h.is_finite() {
        return Err(Error::DegenerateBounds(format!("extent {w} x {h}")));
    }
    let nx = cell_count(w, cell_side);
    let ny = cell_count(h, cell_side);
    let mut cells = Vec::with_capacity((nx * ny) as usize);
    for iy in 0..ny {
        for ix in 0..nx {
            let x0 = bounds.min_x + ix as f64 * cell_side;
            let y0 = bounds.min_y + iy as f64 * cell_side;
            cells.push(GridCell {
                cell_id: (iy * nx + ix) as u64,
                ix,
                iy,
                x0,
                y0,
                x1: (x0 + cell_side).min(bounds.max_x),
                y1: (y0 + cell_side).min(bounds.max_y),
                last_x: ix + 1 == nx,
                last_y: iy + 1 == ny,
            });
        }
    }
    Ok(cells)
}

/// Geometry and bookkeeping for one projected window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMeta {
    pub window_id: u64,
    pub cell_id: u64,
    /// Window offset inside its cell, in `g_step` units.
    pub win_x: u32,
    pub win_y: u32,
    /// Absolute window origin in meters.
    pub x_s: f64,
    pub y_s: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    pub point_count: u64,
    pub g_scale: f64,
    pub g_size: f64,
    /// Points on the far x / y edge of the window clamp into the last pixel.
    /// Set only for the globally last windows.
    pub clamp_x: bool,
    pub clamp_y: bool,
}

impl WindowMeta {
    /// Bundle file stem, `cell{C}_win{X}_{Y}`.
    pub fn name(&self) -> String {
        bundle_name(self.cell_id, self.win_x, self.win_y)
    }

    pub fn pixel_count(&self) -> u64 {
        self.width_px as u64 * self.height_px as u64
    }
}

pub fn bundle_name(cell_id: u64, win_x: u32, win_y: u32) -> String {
    format!("cell{cell_id}_win{win_x}_{win_y}")
}

/// Number of windows needed to cover `extent` meters of a cell.
fn window_count(extent: f64, g_size: f64, g_step: f64) -> u32 {
    let rest = extent - g_size;
    if rest <= 0.0 {
        1
    } else {
        1 + ((rest / g_step) - 1e-9).ceil().max(0.0) as u32
    }
}

/// Windows covering `cell`, row-major by y. `window_id` counts from 0 within
/// the cell; [`Layout`] renumbers them globally. z bounds are left unset.
pub fn windows(cell: &GridCell, config: &ProjectionConfig) -> Vec<WindowMeta> {
    let nx = window_count(cell.x1 - cell.x0, config.g_size, config.g_step);
    let ny = window_count(cell.y1 - cell.y0, config.g_size, config.g_step);
    let px = config.pixels_per_side();
    let mut out = Vec::with_capacity((nx * ny) as usize);
    for wy in 0..ny {
        for wx in 0..nx {
            out.push(WindowMeta {
                window_id: (wy * nx + wx) as u64,
                cell_id: cell.cell_id,
                win_x: wx,
                win_y: wy,
                x_s: cell.x0 + wx as f64 * config.g_step,
                y_s: cell.y0 + wy as f64 * config.g_step,
                width_px: px,
                height_px: px,
                z_min: None,
                z_max: None,
                point_count: 0,
                g_scale: config.g_scale,
                g_size: config.g_size,
                clamp_x: cell.last_x && wx + 1 == nx,
                clamp_y: cell.last_y && wy + 1 == ny,
            });
        }
    }
    out
}

#[inline]
fn quantize_axis(offset: f64, size: f64, scale: f64, n: u32, clamp_far: bool) -> Option<u32> {
    let inside = offset >= 0.0 && (offset < size || (clamp_far && offset <= size * (1.0 + 1e-12)));
    if !inside {
        return None;
    }
    let p = (offset / scale).floor();
    Some(if p >= n as f64 { n - 1 } else { p as u32 })
}

/// Pixel coordinates of `(x, y)` in `window`, or `None` when the location
/// lies outside the window's half-open extent.
///
/// `px = floor((x - x_s) / g_scale)`; the pixel is clamped into range so
/// that floating-point rounding at the far edge cannot push an owned point
/// out of its window.
#[inline]
pub fn quantize_xy(x: f64, y: f64, window: &WindowMeta) -> Option<(u32, u32)> {
    let px = quantize_axis(x - window.x_s, window.g_size, window.g_scale, window.width_px, window.clamp_x)?;
    let py = quantize_axis(y - window.y_s, window.g_size, window.g_scale, window.height_px, window.clamp_y)?;
    Some((px, py))
}

#[inline]
pub fn quantize(point: &Point, window: &WindowMeta) -> Option<(u32, u32)> {
    quantize_xy(point.x, point.y, window)
}

/// Per-window rasters. Pixel `(px, py)` lives at `py * width + px`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterSet {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<[u8; 3]>,
    /// Meters; 0.0 for nodata.
    pub alt: Vec<f64>,
    /// Class ids; [`UNLABELED`] for nodata.
    pub label: Vec<u8>,
    pub mask: Vec<bool>,
    /// Index of the top point; [`NO_WINNER`] for nodata and for pixels filled
    /// by completion.
    pub winner_index: Vec<u64>,
}

impl RasterSet {
    pub fn nodata(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        RasterSet {
            width,
            height,
            rgb: vec![[0; 3]; n],
            alt: vec![0.0; n],
            label: vec![UNLABELED; n],
            mask: vec![false; n],
            winner_index: vec![NO_WINNER; n],
        }
    }

    #[inline]
    pub fn offset(&self, px: u32, py: u32) -> usize {
        py as usize * self.width as usize + px as usize
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Top-z ordering: higher z wins, equal z goes to the lower index.
#[inline]
pub fn beats(z: f64, index: u64, other_z: f64, other_index: u64) -> bool {
    match z.total_cmp(&other_z) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Equal => index < other_index,
        std::cmp::Ordering::Less => false,
    }
}

/// Rasterizes `points` into `window` by the top-z rule and records the
/// window's altitude range and point count. Points that do not quantize into
/// the window are ignored.
pub fn rasterize(points: &[Point], window: &mut WindowMeta) -> RasterSet {
    let mut r = RasterSet::nodata(window.width_px, window.height_px);
    let mut z_min = f64::INFINITY;
    let mut z_max = f64::NEG_INFINITY;
    let mut count = 0u64;
    for p in points {
        let Some((px, py)) = quantize(p, window) else {
            debug_assert!(false, "point {} outside window {}", p.index, window.window_id);
            continue;
        };
        count += 1;
        z_min = z_min.min(p.z);
        z_max = z_max.max(p.z);
        let o = r.offset(px, py);
        if !r.mask[o] || beats(p.z, p.index, r.alt[o], r.winner_index[o]) {
            r.mask[o] = true;
            r.alt[o] = p.z;
            r.rgb[o] = p.rgb();
            r.label[o] = p.label;
            r.winner_index[o] = p.index;
        }
    }
    window.point_count = count;
    if count > 0 {
        window.z_min = Some(z_min);
        window.z_max = Some(z_max);
    } else {
        window.z_min = None;
        window.z_max = None;
    }
    r
}

/// Cells and windows of a projected map, with point-to-window lookup.
#[derive(Debug, Clone)]
pub struct Layout {
    pub bounds: Bounds,
    pub cell_side: f64,
    pub g_step: f64,
    nx_cells: u32,
    ny_cells: u32,
    /// Per cell: window count along x and y, and the first global window id.
    cell_windows: Vec<(u32, u32, usize)>,
    pub windows: Vec<WindowMeta>,
}

impl Layout {
    pub fn new(bounds: Bounds, config: &ProjectionConfig) -> Result<Self> {
        config.validate()?;
        let cells = partition_grid(&bounds, config.cell_side)?;
        let mut all = Vec::new();
        let mut cell_windows = Vec::with_capacity(cells.len());
        for cell in &cells {
            let ws = windows(cell, config);
            let nx = ws.iter().map(|w| w.win_x).max().unwrap_or(0) + 1;
            let ny = ws.iter().map(|w| w.win_y).max().unwrap_or(0) + 1;
            cell_windows.push((nx, ny, all.len()));
            for mut w in ws {
                w.window_id = all.len() as u64;
                all.push(w);
            }
        }
        Ok(Layout {
            bounds,
            cell_side: config.cell_side,
            g_step: config.g_step,
            nx_cells: cell_count(bounds.max_x - bounds.min_x, config.cell_side),
            ny_cells: cell_count(bounds.max_y - bounds.min_y, config.cell_side),
            cell_windows,
            windows: all,
        })
    }

    /// Rebuilds the lookup structure from stored window metadata.
    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        let bounds = manifest
            .bounds
            .ok_or_else(|| Error::Empty("manifest has no bounds".into()))?;
        let mut layout = Layout::new(bounds, &manifest.config)?;
        let mut seen = std::collections::HashSet::new();
        for e in &manifest.windows {
            if !seen.insert(e.meta.window_id) {
                return Err(Error::DuplicateWindow(e.meta.window_id));
            }
        }
        if manifest.windows.len() != layout.windows.len() {
            return Err(Error::Format {
                path: "manifest.json".into(),
                reason: format!(
                    "manifest lists {} windows, layout has {}",
                    manifest.windows.len(),
                    layout.windows.len()
                ),
            });
        }
        for e in &manifest.windows {
            let w = layout
                .windows
                .get_mut(e.meta.window_id as usize)
                .ok_or_else(|| Error::Format {
                    path: "manifest.json".into(),
                    reason: format!("window_id {} out of range", e.meta.window_id),
                })?;
            if w.cell_id != e.meta.cell_id || w.win_x != e.meta.win_x || w.win_y != e.meta.win_y {
                return Err(Error::Format {
                    path: "manifest.json".into(),
                    reason: format!("window {} does not match the layout", e.meta.name()),
                });
            }
            *w = e.meta.clone();
        }
        Ok(layout)
    }

    fn cell_index(&self, v: f64, min: f64, n: u32) -> u32 {
        let i = ((v - min) / self.cell_side).floor();
        if i <= 0.0 {
            0
        } else {
            (i as u32).min(n - 1)
        }
    }

    /// Candidate window offsets along one axis, ascending.
    fn axis_windows(&self, offset: f64, n: u32, g_size: f64) -> std::ops::RangeInclusive<i64> {
        let lo = ((offset - g_size) / self.g_step).floor() as i64 - 1;
        let hi = (offset / self.g_step).floor() as i64 + 1;
        lo.max(0)..=hi.min(n as i64 - 1)
    }

    /// Every window containing `(x, y)` within its own cell, ascending by
    /// window_id, with the pixel in each.
    pub fn windows_containing(&self, x: f64, y: f64, out: &mut Vec<(usize, u32, u32)>) {
        out.clear();
        if !self.bounds.contains(x, y) {
            return;
        }
        let ix = self.cell_index(x, self.bounds.min_x, self.nx_cells);
        let iy = self.cell_index(y, self.bounds.min_y, self.ny_cells);
        let cell = (iy * self.nx_cells + ix) as usize;
        let (nx, ny, first) = self.cell_windows[cell];
        let w0 = &self.windows[first];
        let (cx0, cy0) = (w0.x_s, w0.y_s);
        let g_size = w0.g_size;
        for wy in self.axis_windows(y - cy0, ny, g_size) {
            for wx in self.axis_windows(x - cx0, nx, g_size) {
                let id = first + (wy as usize) * nx as usize + wx as usize;
                if let Some((px, py)) = quantize_xy(x, y, &self.windows[id]) {
                    out.push((id, px, py));
                }
            }
        }
        if out.is_empty() {
            // Floating-point edge between a cell origin and its first window:
            // clamp into the nearest window of the owning cell.
            let wx = (((x - cx0) / self.g_step).floor().max(0.0) as u32).min(nx - 1);
            let wy = (((y - cy0) / self.g_step).floor().max(0.0) as u32).min(ny - 1);
            let id = first + (wy * nx + wx) as usize;
            let w = &self.windows[id];
            let clamp = |off: f64, n: u32| ((off / w.g_scale).floor().max(0.0) as u32).min(n - 1);
            out.push((id, clamp(x - w.x_s, w.width_px), clamp(y - w.y_s, w.height_px)));
        }
    }

    /// Owning window (smallest window_id containing the point) and pixel.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, u32, u32)> {
        let mut buf = Vec::with_capacity(4);
        self.windows_containing(x, y, &mut buf);
        buf.first().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub meta: WindowMeta,
}

/// Index of all projected windows plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ProjectionConfig,
    pub bounds: Option<Bounds>,
    pub windows: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedWindow {
    pub meta: WindowMeta,
    pub raster: RasterSet,
}

#[derive(Debug, Clone, Default)]
pub struct ProjectOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Reject windows with more pixels than this.
    pub max_window_pixels: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub config: ProjectionConfig,
    pub bounds: Option<Bounds>,
    pub windows: Vec<ProjectedWindow>,
}

impl Projection {
    pub fn manifest(&self) -> Manifest {
        Manifest {
            config: self.config,
            bounds: self.bounds,
            windows: self
                .windows
                .iter()
                .map(|w| ManifestEntry {
                    name: w.meta.name(),
                    meta: w.meta.clone(),
                })
                .collect(),
        }
    }
}

/// Sequential binning pass: every point goes to each window that contains
/// it inside its own cell.
struct Binner<'a> {
    layout: &'a Layout,
    bins: Vec<Vec<Point>>,
    scratch: Vec<(usize, u32, u32)>,
}

impl<'a> Binner<'a> {
    fn new(layout: &'a Layout) -> Self {
        Binner {
            layout,
            bins: vec![Vec::new(); layout.windows.len()],
            scratch: Vec::new(),
        }
    }

    fn push(&mut self, batch: &[Point]) {
        for p in batch {
            self.layout.windows_containing(p.x, p.y, &mut self.scratch);
            for &(id, _, _) in &self.scratch {
                self.bins[id].push(*p);
            }
        }
    }
}

fn check_cap(layout: &Layout, cap: Option<u64>) -> Result<()> {
    if let (Some(cap), Some(w)) = (cap, layout.windows.first()) {
        if w.pixel_count() > cap {
            return Err(Error::WindowTooLarge {
                name: w.name(),
                pixels: w.pixel_count(),
                cap,
            });
        }
    }
    Ok(())
}

fn rasterize_all(layout: Layout, bins: Vec<Vec<Point>>, config: &ProjectionConfig, opts: &ProjectOptions) -> Projection {
    let bounds = layout.bounds;
    let metas = layout.windows;
    let windows = crate::par::with_jobs(opts.jobs, || {
        par_range!(0..metas.len())
            .map(|i| {
                let mut meta = metas[i].clone();
                let raster = rasterize(&bins[i], &mut meta);
                ProjectedWindow { meta, raster }
            })
            .collect::<Vec<_>>()
    });
    Projection {
        config: *config,
        bounds: Some(bounds),
        windows,
    }
}

/// Projects an in-memory cloud.
pub fn project_points(points: &[Point], config: &ProjectionConfig, opts: &ProjectOptions) -> Result<Projection> {
    config.validate()?;
    let Some(bounds) = Bounds::of(points) else {
        return Ok(Projection {
            config: *config,
            bounds: None,
            windows: Vec::new(),
        });
    };
    let layout = Layout::new(bounds, config)?;
    check_cap(&layout, opts.max_window_pixels)?;
    let mut binner = Binner::new(&layout);
    binner.push(points);
    let bins = binner.bins;
    Ok(rasterize_all(layout, bins, config, opts))
}

/// Projects a point file in two streaming passes (bounds, then binning).
pub fn project_file(
    path: impl AsRef<Path>,
    chunk_size: usize,
    config: &ProjectionConfig,
    opts: &ProjectOptions,
) -> Result<Projection> {
    config.validate()?;
    let path = path.as_ref();
    let mut bounds = Bounds::empty();
    for batch in read_point_stream(path, chunk_size)? {
        for p in batch? {
            bounds.include(p.x, p.y);
        }
    }
    if bounds.is_empty() {
        return Ok(Projection {
            config: *config,
            bounds: None,
            windows: Vec::new(),
        });
    }
    let layout = Layout::new(bounds, config)?;
    check_cap(&layout, opts.max_window_pixels)?;
    let mut binner = Binner::new(&layout);
    for batch in read_point_stream(path, chunk_size)? {
        binner.push(&batch?);
    }
    let bins = binner.bins;
    Ok(rasterize_all(layout, bins, config, opts))
}

/// Number of masked pixels per window, in window order.
pub fn masked_counts(projection: &Projection) -> Vec<usize> {
    par_iter!(projection.windows).map(|w| w.raster.masked_count()).collect()
}
