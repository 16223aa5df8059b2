//! Information loss of the top-down projection.
//!
//! A point is *overlapped* when it is not the top-z winner of its pixel; it
//! is a *class overlap* when, in addition, its label differs from the
//! winner's. The oracle bound scores every point with its pixel winner's
//! label, which is the best any 2D segmenter can do through the projection.
//!
//! Winners are found by a group-by over pixel keys: each chunk of points
//! builds a partial `key -> winner` map and the partial maps are merged with
//! the top-z rule. The merge is commutative and associative, so results do
//! not depend on chunking or scheduling.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::classes::UNLABELED;
use crate::io::Point;
use crate::metrics::{summarize, ConfusionMatrix, Summary};
use crate::projection::{beats, Bounds, Layout, ProjectionConfig};
#[allow(unused_imports)]
use crate::par::prelude::*;
use crate::{par_chunks, par_iter, Error, Result};

/// Probe scales swept by default, meters per pixel.
pub const DEFAULT_PROBE_SCALES: [f64; 4] = [0.01, 0.02, 0.03, 0.04];
/// Side of the ranking cells, meters.
pub const DEFAULT_ANALYSIS_CELL: f64 = 1.0;
/// Number of rank-percentile bins in the overlap curve.
pub const DEFAULT_CURVE_BINS: usize = 100;

const CHUNK: usize = 1 << 15;

#[derive(Debug, Clone, Copy)]
struct Winner {
    z: f64,
    index: u64,
    label: u8,
}

impl Winner {
    fn of(p: &Point) -> Self {
        Winner {
            z: p.z,
            index: p.index,
            label: p.label,
        }
    }

    fn offer(&mut self, other: Winner) {
        if beats(other.z, other.index, self.z, self.index) {
            *self = other;
        }
    }
}

fn group_winners<K>(points: &[Point], keys: &[K]) -> HashMap<K, Winner>
where
    K: Hash + Eq + Copy + Send + Sync,
{
    let partials: Vec<HashMap<K, Winner>> = par_chunks!(points, CHUNK)
        .zip(par_chunks!(keys, CHUNK))
        .map(|(ps, ks)| {
            let mut m: HashMap<K, Winner> = HashMap::new();
            for (p, k) in ps.iter().zip(ks) {
                m.entry(*k)
                    .and_modify(|w| w.offer(Winner::of(p)))
                    .or_insert_with(|| Winner::of(p));
            }
            m
        })
        .collect();
    let mut iter = partials.into_iter();
    let mut acc = iter.next().unwrap_or_default();
    for part in iter {
        for (k, w) in part {
            acc.entry(k).and_modify(|cur| cur.offer(w)).or_insert(w);
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub cell_x: i64,
    pub cell_y: i64,
    pub point_count: u64,
    pub overlapped_point_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankBin {
    /// Start of the bin in percent of cells ranked by point count; 0 holds
    /// the densest cells.
    pub rank_percentile: f64,
    pub overlap_ratio: f64,
    pub cells: u64,
    pub points: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialOverlap {
    pub probe_scale: f64,
    pub cell_size: f64,
    pub point_count: u64,
    pub overlapped_point_count: u64,
    pub spatial_overlap_ratio: f64,
    /// Cells sorted by descending point count (ties by cell key).
    pub cells: Vec<CellStats>,
    pub curve: Vec<RankBin>,
}

#[inline]
fn grid_key(v: f64, origin: f64, scale: f64) -> i64 {
    ((v - origin) / scale).floor() as i64
}

/// Overlap ratio of `points` on a global pixel grid of `probe_scale` meters
/// anchored at the cloud's minimum corner, with a rank curve over
/// `cell_size` ranking cells split into `bins` percentile bins.
pub fn spatial_overlap(points: &[Point], probe_scale: f64, cell_size: f64, bins: usize) -> Result<SpatialOverlap> {
    if !(probe_scale.is_finite() && probe_scale > 0.0) {
        return Err(Error::Config(format!("probe_scale must be positive, got {probe_scale}")));
    }
    if !(cell_size.is_finite() && cell_size > 0.0) || bins == 0 {
        return Err(Error::Config("cell_size and bins must be positive".into()));
    }
    let bounds = Bounds::of(points).ok_or_else(|| Error::Empty("cloud has no points".into()))?;
    let keys: Vec<(i64, i64)> = par_iter!(points)
        .map(|p| {
            (
                grid_key(p.x, bounds.min_x, probe_scale),
                grid_key(p.y, bounds.min_y, probe_scale),
            )
        })
        .collect();
    let winners = group_winners(points, &keys);

    let mut cells: BTreeMap<(i64, i64), (u64, u64)> = BTreeMap::new();
    let mut overlapped = 0u64;
    for (p, k) in points.iter().zip(&keys) {
        let lost = winners[k].index != p.index;
        let c = cells
            .entry((grid_key(p.x, bounds.min_x, cell_size), grid_key(p.y, bounds.min_y, cell_size)))
            .or_default();
        c.0 += 1;
        if lost {
            c.1 += 1;
            overlapped += 1;
        }
    }
    let mut cells: Vec<CellStats> = cells
        .into_iter()
        .map(|((cx, cy), (n, o))| CellStats {
            cell_x: cx,
            cell_y: cy,
            point_count: n,
            overlapped_point_count: o,
        })
        .collect();
    // stable sort keeps key order among equal counts
    cells.sort_by_key(|c| std::cmp::Reverse(c.point_count));

    let n = cells.len();
    let mut acc = vec![(0u64, 0u64, 0u64); bins];
    for (rank, c) in cells.iter().enumerate() {
        let b = rank * bins / n;
        acc[b].0 += 1;
        acc[b].1 += c.point_count;
        acc[b].2 += c.overlapped_point_count;
    }
    let curve = acc
        .into_iter()
        .enumerate()
        .filter(|(_, (cells, _, _))| *cells > 0)
        .map(|(b, (cells, pts, lost))| RankBin {
            rank_percentile: b as f64 * 100.0 / bins as f64,
            overlap_ratio: lost as f64 / pts as f64,
            cells,
            points: pts,
        })
        .collect();

    Ok(SpatialOverlap {
        probe_scale,
        cell_size,
        point_count: points.len() as u64,
        overlapped_point_count: overlapped,
        spatial_overlap_ratio: overlapped as f64 / points.len() as f64,
        cells,
        curve,
    })
}

/// Denominator of the class overlap ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    /// All evaluated points.
    #[default]
    AllPoints,
    /// Only overlapped (non-winner) evaluated points.
    OverlappedPoints,
}

impl std::str::FromStr for Denominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all-points" => Ok(Denominator::AllPoints),
            "overlapped" | "overlapped-points" => Ok(Denominator::OverlappedPoints),
            other => Err(Error::Config(format!("unknown denominator {other:?}"))),
        }
    }
}

impl std::fmt::Display for Denominator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Denominator::AllPoints => "all",
            Denominator::OverlappedPoints => "overlapped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapPair {
    pub winner: u8,
    pub loser: u8,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassOverlap {
    pub g_scale: f64,
    pub denominator: Denominator,
    /// Disagreeing points over the chosen denominator.
    pub class_overlap_ratio: f64,
    /// Non-winners over all points, in the same windowed grouping.
    pub spatial_overlap_ratio: f64,
    pub point_count: u64,
    /// Points with a class label whose pixel winner also has one.
    pub evaluated_points: u64,
    pub overlapped_points: u64,
    pub disagreeing_points: u64,
    /// Disagreements by (winner class, loser class), ascending.
    pub pairs: Vec<OverlapPair>,
}

/// Per-point pixel winner labels in the projection windows of `config`.
struct WindowedWinners {
    winner_label: Vec<u8>,
    is_winner: Vec<bool>,
}

fn windowed_winners(points: &[Point], config: &ProjectionConfig) -> Result<WindowedWinners> {
    config.validate()?;
    let bounds = Bounds::of(points).ok_or_else(|| Error::Empty("cloud has no points".into()))?;
    let layout = Layout::new(bounds, config)?;
    let keys: Vec<Option<(u32, u32, u32)>> = par_iter!(points)
        .map(|p| layout.locate(p.x, p.y).map(|(id, px, py)| (id as u32, px, py)))
        .collect();
    let winners = group_winners(points, &keys);
    let (winner_label, is_winner) = points
        .iter()
        .zip(&keys)
        .map(|(p, k)| match k {
            Some(_) => {
                let w = winners[k];
                (w.label, w.index == p.index)
            }
            None => (UNLABELED, false),
        })
        .unzip();
    Ok(WindowedWinners {
        winner_label,
        is_winner,
    })
}

fn require_labels(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Empty("cloud has no points".into()));
    }
    if points.iter().all(|p| p.label == UNLABELED) {
        return Err(Error::Empty("every point is unlabeled".into()));
    }
    Ok(())
}

/// Fraction of points whose label differs from their pixel winner's label at
/// `config.g_scale` inside the projection windows.
pub fn class_overlap(points: &[Point], config: &ProjectionConfig, denominator: Denominator) -> Result<ClassOverlap> {
    require_labels(points)?;
    let ww = windowed_winners(points, config)?;
    let mut evaluated = 0u64;
    let mut overlapped = 0u64;
    let mut overlapped_evaluated = 0u64;
    let mut disagreeing = 0u64;
    let mut pairs: BTreeMap<(u8, u8), u64> = BTreeMap::new();
    for ((p, &wl), &win) in points.iter().zip(&ww.winner_label).zip(&ww.is_winner) {
        if !win {
            overlapped += 1;
        }
        if p.label == UNLABELED || wl == UNLABELED {
            continue;
        }
        evaluated += 1;
        if !win {
            overlapped_evaluated += 1;
        }
        if p.label != wl {
            disagreeing += 1;
            *pairs.entry((wl, p.label)).or_default() += 1;
        }
    }
    let denom = match denominator {
        Denominator::AllPoints => evaluated,
        Denominator::OverlappedPoints => overlapped_evaluated,
    };
    Ok(ClassOverlap {
        g_scale: config.g_scale,
        denominator,
        class_overlap_ratio: if denom == 0 { 0.0 } else { disagreeing as f64 / denom as f64 },
        spatial_overlap_ratio: overlapped as f64 / points.len() as f64,
        point_count: points.len() as u64,
        evaluated_points: evaluated,
        overlapped_points: overlapped,
        disagreeing_points: disagreeing,
        pairs: pairs
            .into_iter()
            .map(|((winner, loser), count)| OverlapPair { winner, loser, count })
            .collect(),
    })
}

/// Labels every point with its pixel winner's ground-truth label.
pub fn oracle_labels(points: &[Point], config: &ProjectionConfig) -> Result<Vec<u8>> {
    Ok(windowed_winners(points, config)?.winner_label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBound {
    pub summary: Summary,
    pub confusion: ConfusionMatrix,
}

/// Scores of the ground-truth passthrough segmenter under `config`.
pub fn oracle_bound(points: &[Point], config: &ProjectionConfig) -> Result<OracleBound> {
    require_labels(points)?;
    let pred = oracle_labels(points, config)?;
    let gt: Vec<u8> = points.iter().map(|p| p.label).collect();
    let confusion = ConfusionMatrix::from_labels(&gt, &pred)?;
    Ok(OracleBound {
        summary: summarize(&confusion)?,
        confusion,
    })
}
