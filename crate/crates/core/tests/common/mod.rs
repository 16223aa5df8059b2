//! Brute-force reference implementations shared by the integration tests.
//!
//! Everything here is written directly from the definitions with ordered
//! maps and plain scans, without touching the library's lookup or
//! group-by code, so agreement between the two is meaningful.

#![allow(dead_code)]

use std::collections::BTreeMap;

use bevgrid::io::Point;
use bevgrid::projection::ProjectionConfig;
use bevgrid::synth::{generate_synthetic_city, Sampling, SceneSpec};
use bevgrid::{RasterSet, UNLABELED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NODATA: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefWindow {
    pub cell: usize,
    pub x_s: f64,
    pub y_s: f64,
    pub clamp_x: bool,
    pub clamp_y: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefCell {
    pub x0: f64,
    pub y0: f64,
    pub last_x: bool,
    pub last_y: bool,
}

pub struct RefLayout {
    pub min: (f64, f64),
    pub max: (f64, f64),
    pub cells: Vec<RefCell>,
    nx: usize,
    ny: usize,
    /// Global window ids of each cell, ascending.
    cell_windows: Vec<Vec<usize>>,
    /// Global window list, cell by cell, row-major by y inside a cell.
    pub windows: Vec<RefWindow>,
    pub cfg: ProjectionConfig,
}

fn axis_count(extent: f64, side: f64) -> usize {
    let mut n = 1;
    while (n as f64) * side < extent {
        n += 1;
    }
    n
}

fn window_origins(x0: f64, x1: f64, size: f64, step: f64) -> Vec<f64> {
    let mut out = vec![x0];
    while out.last().unwrap() + size < x1 - 1e-9 * step {
        out.push(x0 + out.len() as f64 * step);
    }
    out
}

pub fn bounds(points: &[Point]) -> ((f64, f64), (f64, f64)) {
    let mut min = (f64::INFINITY, f64::INFINITY);
    let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min.0 = min.0.min(p.x);
        min.1 = min.1.min(p.y);
        max.0 = max.0.max(p.x);
        max.1 = max.1.max(p.y);
    }
    (min, max)
}

impl RefLayout {
    pub fn new(points: &[Point], cfg: &ProjectionConfig) -> Self {
        let (min, max) = bounds(points);
        let nx = axis_count(max.0 - min.0, cfg.cell_side);
        let ny = axis_count(max.1 - min.1, cfg.cell_side);
        let mut cells = Vec::new();
        let mut windows = Vec::new();
        let mut cell_windows = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let x0 = min.0 + ix as f64 * cfg.cell_side;
                let y0 = min.1 + iy as f64 * cfg.cell_side;
                let x1 = (x0 + cfg.cell_side).min(max.0);
                let y1 = (y0 + cfg.cell_side).min(max.1);
                let cell = RefCell {
                    x0,
                    y0,
                    last_x: ix + 1 == nx,
                    last_y: iy + 1 == ny,
                };
                let xs = window_origins(x0, x1, cfg.g_size, cfg.g_step);
                let ys = window_origins(y0, y1, cfg.g_size, cfg.g_step);
                cell_windows.push((windows.len()..windows.len() + xs.len() * ys.len()).collect());
                for (wy, &y_s) in ys.iter().enumerate() {
                    for (wx, &x_s) in xs.iter().enumerate() {
                        windows.push(RefWindow {
                            cell: cells.len(),
                            x_s,
                            y_s,
                            clamp_x: cell.last_x && wx + 1 == xs.len(),
                            clamp_y: cell.last_y && wy + 1 == ys.len(),
                        });
                    }
                }
                cells.push(cell);
            }
        }
        RefLayout {
            min,
            max,
            cells,
            nx,
            ny,
            cell_windows,
            windows,
            cfg: *cfg,
        }
    }

    fn in_cell(&self, c: &RefCell, x: f64, y: f64) -> bool {
        let side = self.cfg.cell_side;
        let ok = |v: f64, lo: f64, last: bool, hi: f64| v >= lo && (v < lo + side || (last && v <= hi));
        ok(x, c.x0, c.last_x, self.max.0) && ok(y, c.y0, c.last_y, self.max.1)
    }

    fn pixel(&self, offset: f64, clamp: bool) -> Option<u32> {
        let size = self.cfg.g_size;
        let n = (size / self.cfg.g_scale).round() as u32;
        if offset < 0.0 || !(offset < size || (clamp && offset <= size * (1.0 + 1e-12))) {
            return None;
        }
        Some(((offset / self.cfg.g_scale).floor() as u32).min(n - 1))
    }

    /// The cell containing `(x, y)` by the half-open definition. Only the
    /// cells around the arithmetic guess are tested.
    fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        let gx = ((x - self.min.0) / self.cfg.cell_side).floor() as i64;
        let gy = ((y - self.min.1) / self.cfg.cell_side).floor() as i64;
        let mut found = None;
        for iy in (gy - 1).max(0)..=(gy + 1).min(self.ny as i64 - 1) {
            for ix in (gx - 1).max(0)..=(gx + 1).min(self.nx as i64 - 1) {
                let id = iy as usize * self.nx + ix as usize;
                if self.in_cell(&self.cells[id], x, y) {
                    assert!(found.is_none(), "cells overlap at ({x}, {y})");
                    found = Some(id);
                }
            }
        }
        found
    }

    /// First window (in global order) of the point's own cell that contains
    /// it, with the pixel.
    pub fn owner(&self, x: f64, y: f64) -> Option<(usize, u32, u32)> {
        let cell = self.cell_of(x, y)?;
        self.cell_windows[cell].iter().find_map(|&id| {
            let w = &self.windows[id];
            let px = self.pixel(x - w.x_s, w.clamp_x)?;
            let py = self.pixel(y - w.y_s, w.clamp_y)?;
            Some((id, px, py))
        })
    }

    /// Every window of the point's own cell that contains it.
    pub fn containing(&self, x: f64, y: f64) -> Vec<(usize, u32, u32)> {
        let Some(cell) = self.cell_of(x, y) else {
            return Vec::new();
        };
        self.cell_windows[cell]
            .iter()
            .filter_map(|&id| {
                let w = &self.windows[id];
                let px = self.pixel(x - w.x_s, w.clamp_x)?;
                let py = self.pixel(y - w.y_s, w.clamp_y)?;
                Some((id, px, py))
            })
            .collect()
    }
}

/// Position in `points` of the top-z point of a group: highest z, then the
/// lowest point index.
pub fn top_of(points: &[Point], group: &[usize]) -> usize {
    let mut best = group[0];
    for &i in &group[1..] {
        let (a, b) = (&points[i], &points[best]);
        if a.z > b.z || (a.z == b.z && a.index < b.index) {
            best = i;
        }
    }
    best
}

/// Winner of every occupied pixel of every window, keyed by
/// `(window, px, py)`.
pub fn pixel_winners(points: &[Point], cfg: &ProjectionConfig) -> BTreeMap<(usize, u32, u32), usize> {
    let layout = RefLayout::new(points, cfg);
    let mut groups: BTreeMap<(usize, u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        for key in layout.containing(p.x, p.y) {
            groups.entry(key).or_default().push(i);
        }
    }
    groups.into_iter().map(|(k, g)| (k, top_of(points, &g))).collect()
}

/// Per-point label of the winner of its owning pixel (255 outside).
pub fn oracle_labels(points: &[Point], cfg: &ProjectionConfig) -> Vec<u8> {
    let layout = RefLayout::new(points, cfg);
    let keys: Vec<Option<(usize, u32, u32)>> = points.iter().map(|p| layout.owner(p.x, p.y)).collect();
    let mut groups: BTreeMap<(usize, u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        if let Some(k) = k {
            groups.entry(*k).or_default().push(i);
        }
    }
    let winners: BTreeMap<_, _> = groups.into_iter().map(|(k, g)| (k, top_of(points, &g))).collect();
    keys.iter()
        .map(|k| match k {
            Some(k) => points[winners[k]].label,
            None => UNLABELED,
        })
        .collect()
}

pub struct RefClassOverlap {
    pub overlapped: u64,
    pub evaluated: u64,
    pub overlapped_evaluated: u64,
    pub disagreeing: u64,
    pub pairs: BTreeMap<(u8, u8), u64>,
}

pub fn class_overlap(points: &[Point], cfg: &ProjectionConfig) -> RefClassOverlap {
    let layout = RefLayout::new(points, cfg);
    let keys: Vec<Option<(usize, u32, u32)>> = points.iter().map(|p| layout.owner(p.x, p.y)).collect();
    let mut groups: BTreeMap<(usize, u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        if let Some(k) = k {
            groups.entry(*k).or_default().push(i);
        }
    }
    let mut out = RefClassOverlap {
        overlapped: 0,
        evaluated: 0,
        overlapped_evaluated: 0,
        disagreeing: 0,
        pairs: BTreeMap::new(),
    };
    for (i, p) in points.iter().enumerate() {
        let (winner_label, won) = match &keys[i] {
            Some(k) => {
                let w = top_of(points, &groups[k]);
                (points[w].label, w == i)
            }
            None => (UNLABELED, false),
        };
        if !won {
            out.overlapped += 1;
        }
        if p.label == UNLABELED || winner_label == UNLABELED {
            continue;
        }
        out.evaluated += 1;
        if !won {
            out.overlapped_evaluated += 1;
        }
        if p.label != winner_label {
            out.disagreeing += 1;
            *out.pairs.entry((winner_label, p.label)).or_default() += 1;
        }
    }
    out
}

pub struct RefSpatial {
    pub overlapped: u64,
    /// `(cell_x, cell_y) -> (points, overlapped)`.
    pub cells: BTreeMap<(i64, i64), (u64, u64)>,
    /// `(rank_percentile, overlap_ratio, cells, points)` per non-empty bin.
    pub curve: Vec<(f64, f64, u64, u64)>,
}

pub fn spatial_overlap(points: &[Point], scale: f64, cell_size: f64, bins: usize) -> RefSpatial {
    let (min, _) = bounds(points);
    let key = |v: f64, o: f64, s: f64| ((v - o) / s).floor() as i64;
    let mut groups: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        groups.entry((key(p.x, min.0, scale), key(p.y, min.1, scale))).or_default().push(i);
    }
    let mut lost = vec![false; points.len()];
    for g in groups.values() {
        let w = top_of(points, g);
        for &i in g {
            lost[i] = i != w;
        }
    }
    let mut cells: BTreeMap<(i64, i64), (u64, u64)> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let c = cells.entry((key(p.x, min.0, cell_size), key(p.y, min.1, cell_size))).or_default();
        c.0 += 1;
        c.1 += lost[i] as u64;
    }
    let mut ranked: Vec<((i64, i64), (u64, u64))> = cells.clone().into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.0.cmp(&b.0)));
    let n = ranked.len();
    let mut curve = Vec::new();
    for b in 0..bins {
        let members: Vec<_> = ranked
            .iter()
            .enumerate()
            .filter(|(r, _)| r * bins / n == b)
            .map(|(_, c)| c.1)
            .collect();
        if members.is_empty() {
            continue;
        }
        let pts: u64 = members.iter().map(|m| m.0).sum();
        let ov: u64 = members.iter().map(|m| m.1).sum();
        curve.push((b as f64 * 100.0 / bins as f64, ov as f64 / pts as f64, members.len() as u64, pts));
    }
    RefSpatial {
        overlapped: lost.iter().filter(|&&l| l).count() as u64,
        cells,
        curve,
    }
}

/// 13x13 counts over pairs where both labels are classes.
pub fn confusion(gt: &[u8], pred: &[u8]) -> [[u64; 13]; 13] {
    let mut m = [[0u64; 13]; 13];
    for (&g, &p) in gt.iter().zip(pred) {
        if g != NODATA && p != NODATA {
            m[g as usize][p as usize] += 1;
        }
    }
    m
}

/// Reference OA, mean recall and mIoU of a confusion matrix.
pub fn scores(m: &[[u64; 13]; 13]) -> (f64, f64, f64) {
    let total: u64 = m.iter().flatten().sum();
    let trace: u64 = (0..13).map(|c| m[c][c]).sum();
    let mut recalls = Vec::new();
    let mut ious = Vec::new();
    for (c, counts) in m.iter().enumerate() {
        let row: u64 = counts.iter().sum();
        let col: u64 = (0..13).map(|r| m[r][c]).sum();
        if row > 0 {
            recalls.push(m[c][c] as f64 / row as f64);
        }
        if row + col > m[c][c] {
            ious.push(m[c][c] as f64 / (row + col - m[c][c]) as f64);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (trace as f64 / total as f64, mean(&recalls), mean(&ious))
}

/// A random urban scene and a projection config that together exercise
/// multiple cells, overlapping windows and stacked points. At most
/// `max_points` points.
pub fn random_case(seed: u64, max_points: usize) -> (SceneSpec, Vec<Point>, ProjectionConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.random_range(15.0..70.0);
    let h = rng.random_range(15.0..70.0);
    let density = rng.random_range(3.0..25.0);
    let mut spec = SceneSpec::urban(w, h, density, seed);
    if rng.random_bool(0.25) {
        spec.sampling = Sampling::Lattice;
    }
    let mut points = generate_synthetic_city(&spec).unwrap();
    while points.len() > max_points {
        spec.density *= 0.7;
        points = generate_synthetic_city(&spec).unwrap();
    }
    let g_scale = [0.05, 0.1, 0.2, 0.25][rng.random_range(0..4)];
    let pixels = rng.random_range(20..120) as f64;
    let g_size = g_scale * pixels;
    let g_step = g_size * [1.0, 0.5, 0.75][rng.random_range(0..3)];
    let cell_side = g_size * rng.random_range(1.0..3.0);
    let cfg = ProjectionConfig {
        g_scale,
        g_size,
        g_step,
        cell_side,
        ..Default::default()
    };
    (spec, points, cfg)
}

/// Random raster with a `fill` fraction of masked pixels.
pub fn random_raster(rng: &mut ChaCha8Rng, w: u32, h: u32, fill: f64) -> RasterSet {
    let mut r = RasterSet::nodata(w, h);
    for o in 0..r.len() {
        if rng.random_bool(fill) {
            r.mask[o] = true;
            r.label[o] = rng.random_range(0..13);
            r.alt[o] = rng.random_range(-5.0..40.0);
            r.rgb[o] = [rng.random(), rng.random(), rng.random()];
            r.winner_index[o] = o as u64;
        }
    }
    r
}

/// Reference flood fill: iteration at which each pixel first gets a masked
/// pixel within Chebyshev `radius`, or `None` if never.
pub fn flood_levels(r: &RasterSet, radius: u32, max_iter: u32) -> Vec<Option<u32>> {
    let (w, h) = (r.width as i64, r.height as i64);
    let mut level: Vec<Option<u32>> = r.mask.iter().map(|&m| if m { Some(0) } else { None }).collect();
    for it in 1..=max_iter {
        let prev = level.clone();
        for y in 0..h {
            for x in 0..w {
                let o = (y * w + x) as usize;
                if prev[o].is_some() {
                    continue;
                }
                let rr = radius as i64;
                'scan: for ny in (y - rr).max(0)..=(y + rr).min(h - 1) {
                    for nx in (x - rr).max(0)..=(x + rr).min(w - 1) {
                        if prev[(ny * w + nx) as usize].is_some() {
                            level[o] = Some(it);
                            break 'scan;
                        }
                    }
                }
            }
        }
        if level == prev {
            break;
        }
    }
    level
}
