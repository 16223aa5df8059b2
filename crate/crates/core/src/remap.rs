//! BEV predictions back to per-point labels.
//!
//! A point takes the label of the pixel it quantizes to in its owning
//! window. With overlapping windows (`g_step < g_size`) the window with the
//! smallest `window_id` owns the point. Points outside every window are
//! labeled 255 and counted separately.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle::read_label_png;
use crate::classes::UNLABELED;
use crate::io::{read_point_stream, Point};
use crate::projection::{quantize, Layout, Manifest, RasterSet, WindowMeta};
#[allow(unused_imports)]
use crate::par::prelude::*;
use crate::{par_iter, Error, Result};

/// Dense per-window label prediction; 255 means "no prediction".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRaster {
    pub window_id: u64,
    pub width: u32,
    pub height: u32,
    pub label: Vec<u8>,
}

impl PredictionRaster {
    /// Uses a projected label raster as the prediction (ground-truth
    /// passthrough).
    pub fn from_raster(window_id: u64, raster: &RasterSet) -> Self {
        PredictionRaster {
            window_id,
            width: raster.width,
            height: raster.height,
            label: raster.label.clone(),
        }
    }

    fn check(&self, meta: &WindowMeta) -> Result<()> {
        if self.window_id != meta.window_id {
            return Err(Error::PredictionMismatch {
                window_id: self.window_id,
                reason: format!("unknown window_id (expected {})", meta.window_id),
            });
        }
        if (self.width, self.height) != (meta.width_px, meta.height_px)
            || self.label.len() != meta.pixel_count() as usize
        {
            return Err(Error::PredictionMismatch {
                window_id: self.window_id,
                reason: format!(
                    "raster is {}x{}, window {} is {}x{}",
                    self.width,
                    self.height,
                    meta.name(),
                    meta.width_px,
                    meta.height_px
                ),
            });
        }
        Ok(())
    }

    #[inline]
    fn at(&self, px: u32, py: u32) -> u8 {
        self.label[py as usize * self.width as usize + px as usize]
    }
}

/// Labels for `points` (same order) from one window's prediction.
pub fn remap_window(pred: &PredictionRaster, meta: &WindowMeta, points: &[Point]) -> Result<Vec<u8>> {
    pred.check(meta)?;
    Ok(points
        .iter()
        .map(|p| match quantize(p, meta) {
            Some((px, py)) => pred.at(px, py),
            None => UNLABELED,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub points_total: u64,
    /// Points that received a class id.
    pub points_labeled: u64,
    /// Points inside a window whose pixel carried 255.
    pub points_unlabeled: u64,
    /// Points outside every window.
    pub points_outside: u64,
}

#[derive(Debug, Clone)]
pub struct RemapResult {
    /// Indexed by point index.
    pub labels: Vec<u8>,
    pub coverage: Coverage,
}

enum Outcome {
    Labeled(u8),
    NoPrediction,
    Outside,
}

struct Remapper<'a> {
    layout: Layout,
    preds: Vec<&'a PredictionRaster>,
}

impl<'a> Remapper<'a> {
    fn new(manifest: &Manifest, predictions: &'a BTreeMap<u64, PredictionRaster>) -> Result<Self> {
        let layout = Layout::from_manifest(manifest)?;
        let mut preds = Vec::with_capacity(layout.windows.len());
        for meta in &layout.windows {
            let pred = predictions
                .get(&meta.window_id)
                .ok_or_else(|| Error::MissingPrediction(meta.name()))?;
            pred.check(meta)?;
            preds.push(pred);
        }
        Ok(Remapper { layout, preds })
    }

    fn label(&self, p: &Point) -> Outcome {
        match self.layout.locate(p.x, p.y) {
            None => Outcome::Outside,
            Some((id, px, py)) => match self.preds[id].at(px, py) {
                UNLABELED => Outcome::NoPrediction,
                l => Outcome::Labeled(l),
            },
        }
    }

    fn apply(&self, batch: &[Point], out: &mut RemapResult) -> Result<()> {
        let outcomes: Vec<Outcome> = par_iter!(batch).map(|p| self.label(p)).collect();
        for (p, o) in batch.iter().zip(outcomes) {
            let slot = out.labels.get_mut(p.index as usize).ok_or_else(|| Error::Format {
                path: "<points>".into(),
                reason: format!("point index {} beyond cloud size", p.index),
            })?;
            out.coverage.points_total += 1;
            *slot = match o {
                Outcome::Labeled(l) => {
                    out.coverage.points_labeled += 1;
                    l
                }
                Outcome::NoPrediction => {
                    out.coverage.points_unlabeled += 1;
                    UNLABELED
                }
                Outcome::Outside => {
                    out.coverage.points_outside += 1;
                    UNLABELED
                }
            };
        }
        Ok(())
    }
}

fn empty_result(n: usize) -> RemapResult {
    RemapResult {
        labels: vec![UNLABELED; n],
        coverage: Coverage::default(),
    }
}

/// Remaps an in-memory cloud whose indices are `0..points.len()`.
pub fn remap_points(
    manifest: &Manifest,
    predictions: &BTreeMap<u64, PredictionRaster>,
    points: &[Point],
) -> Result<RemapResult> {
    let mut out = empty_result(points.len());
    if manifest.windows.is_empty() {
        out.coverage.points_total = points.len() as u64;
        out.coverage.points_outside = points.len() as u64;
        return Ok(out);
    }
    let remapper = Remapper::new(manifest, predictions)?;
    remapper.apply(points, &mut out)?;
    Ok(out)
}

/// Streams a point file through the remapper.
pub fn remap_file(
    manifest: &Manifest,
    predictions: &BTreeMap<u64, PredictionRaster>,
    cloud: impl AsRef<Path>,
    chunk_size: usize,
) -> Result<RemapResult> {
    let reader = read_point_stream(cloud, chunk_size)?;
    let mut out = empty_result(reader.declared_count() as usize);
    if manifest.windows.is_empty() {
        for batch in reader {
            let n = batch?.len() as u64;
            out.coverage.points_total += n;
            out.coverage.points_outside += n;
        }
        return Ok(out);
    }
    let remapper = Remapper::new(manifest, predictions)?;
    for batch in reader {
        remapper.apply(&batch?, &mut out)?;
    }
    Ok(out)
}

/// Loads `{name}_label.png` for every manifest window from `dir`.
pub fn load_predictions(dir: &Path, manifest: &Manifest) -> Result<BTreeMap<u64, PredictionRaster>> {
    let mut out = BTreeMap::new();
    for entry in &manifest.windows {
        let path = dir.join(format!("{}_label.png", entry.name));
        if !path.exists() {
            return Err(Error::MissingPrediction(entry.name.clone()));
        }
        let (width, height, label) = read_label_png(&path)?;
        let id = entry.meta.window_id;
        if out
            .insert(
                id,
                PredictionRaster {
                    window_id: id,
                    width,
                    height,
                    label,
                },
            )
            .is_some()
        {
            return Err(Error::DuplicateWindow(id));
        }
    }
    Ok(out)
}
