//! Confusion matrices and segmentation scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classes::{is_valid_label, CLASS_NAMES, NUM_CLASSES, UNLABELED};
#[allow(unused_imports)]
use crate::par::prelude::*;
use crate::{par_chunks, Error, Result};

/// Offset inside the log-inverse class weight, `1 / ln(offset + f_c)`.
pub const DEFAULT_WEIGHT_OFFSET: f64 = 1.02;

/// 13 x 13 counts, rows are ground truth and columns predictions. Pairs with
/// a 255 on either side are tallied separately and never enter a score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
    /// Pairs whose ground truth is 255.
    pub excluded_gt: u64,
    /// Pairs with a labeled ground truth but a 255 prediction.
    pub excluded_pred: u64,
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        ConfusionMatrix {
            counts: [[0; NUM_CLASSES]; NUM_CLASSES],
            excluded_gt: 0,
            excluded_pred: 0,
        }
    }
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_labels(gt: &[u8], pred: &[u8]) -> Result<Self> {
        let mut cm = Self::new();
        cm.accumulate(gt, pred)?;
        Ok(cm)
    }

    /// Adds every `(gt[i], pred[i])` pair.
    pub fn accumulate(&mut self, gt: &[u8], pred: &[u8]) -> Result<()> {
        if gt.len() != pred.len() {
            return Err(Error::LengthMismatch {
                expected: gt.len() as u64,
                actual: pred.len() as u64,
            });
        }
        for (position, (&g, &p)) in gt.iter().zip(pred).enumerate() {
            if !is_valid_label(g) {
                return Err(Error::InvalidLabel { label: g, position });
            }
            if !is_valid_label(p) {
                return Err(Error::InvalidLabel { label: p, position });
            }
        }
        let parts: Vec<ConfusionMatrix> = par_chunks!(gt, 1 << 16)
            .zip(par_chunks!(pred, 1 << 16))
            .map(|(g, p)| {
                let mut cm = ConfusionMatrix::new();
                for (&g, &p) in g.iter().zip(p) {
                    cm.add(g, p);
                }
                cm
            })
            .collect();
        for part in &parts {
            self.merge(part);
        }
        Ok(())
    }

    #[inline]
    fn add(&mut self, gt: u8, pred: u8) {
        if gt == UNLABELED {
            self.excluded_gt += 1;
        } else if pred == UNLABELED {
            self.excluded_pred += 1;
        } else {
            self.counts[gt as usize][pred as usize] += 1;
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
        self.excluded_gt += other.excluded_gt;
        self.excluded_pred += other.excluded_pred;
    }

    /// Number of evaluated (non-excluded) pairs.
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn summarize(&self) -> Result<Summary> {
        summarize(self)
    }
}

/// Scores derived from a [`ConfusionMatrix`]. Per-class entries are `None`
/// for classes excluded from the corresponding mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub oa: f64,
    pub macc: f64,
    pub miou: f64,
    pub iou: [Option<f64>; NUM_CLASSES],
    pub recall: [Option<f64>; NUM_CLASSES],
    pub evaluated: u64,
    pub excluded_gt: u64,
    pub excluded_pred: u64,
}

/// OA, mean per-class recall, per-class IoU and mIoU.
///
/// Recall is undefined for classes absent from the ground truth. IoU is
/// undefined only for classes absent from both ground truth and prediction;
/// a class present in the ground truth but never predicted scores 0.
pub fn summarize(cm: &ConfusionMatrix) -> Result<Summary> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix has no evaluated points".into()));
    }
    let mut iou = [None; NUM_CLASSES];
    let mut recall = [None; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let tp = cm.counts[c][c] as f64;
        let row = cm.row_sum(c);
        let col = cm.col_sum(c);
        if row > 0 {
            recall[c] = Some(tp / row as f64);
        }
        let union = row + col - cm.counts[c][c];
        if union > 0 {
            iou[c] = Some(tp / union as f64);
        }
    }
    let mean = |v: &[Option<f64>]| {
        let defined: Vec<f64> = v.iter().flatten().copied().collect();
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(Summary {
        oa: cm.trace() as f64 / total as f64,
        macc: mean(&recall),
        miou: mean(&iou),
        iou,
        recall,
        evaluated: total,
        excluded_gt: cm.excluded_gt,
        excluded_pred: cm.excluded_pred,
    })
}

/// JSON report keyed by class name, as written to `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub oa: f64,
    pub macc: f64,
    pub miou: f64,
    pub per_class_iou: BTreeMap<String, Option<f64>>,
    pub per_class_recall: BTreeMap<String, Option<f64>>,
    pub evaluated_points: u64,
    pub excluded_unlabeled_gt: u64,
    pub excluded_unlabeled_pred: u64,
}

impl From<&Summary> for MetricsReport {
    fn from(s: &Summary) -> Self {
        let keyed = |v: &[Option<f64>; NUM_CLASSES]| {
            CLASS_NAMES
                .iter()
                .zip(v)
                .map(|(name, x)| (name.to_string(), *x))
                .collect()
        };
        MetricsReport {
            oa: s.oa,
            macc: s.macc,
            miou: s.miou,
            per_class_iou: keyed(&s.iou),
            per_class_recall: keyed(&s.recall),
            evaluated_points: s.evaluated,
            excluded_unlabeled_gt: s.excluded_gt,
            excluded_unlabeled_pred: s.excluded_pred,
        }
    }
}

/// Log-inverse class weights `w_c = 1 / ln(offset + f_c)`, `f_c` the class
/// frequency. Classes with zero count get the largest weight,
/// `1 / ln(offset)`.
pub fn class_weights_with_offset(histogram: &[u64], offset: f64) -> Result<Vec<f64>> {
    if !(offset > 1.0 && offset.is_finite()) {
        return Err(Error::Config(format!("weight offset must exceed 1, got {offset}")));
    }
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(Error::Empty("class histogram is all zero".into()));
    }
    Ok(histogram
        .iter()
        .map(|&c| 1.0 / (offset + c as f64 / total as f64).ln())
        .collect())
}

pub fn class_weights(histogram: &[u64]) -> Result<Vec<f64>> {
    class_weights_with_offset(histogram, DEFAULT_WEIGHT_OFFSET)
}

/// Per-class point counts over labels `0..=12`; 255 is skipped.
pub fn label_histogram(labels: &[u8]) -> [u64; NUM_CLASSES] {
    let mut h = [0u64; NUM_CLASSES];
    for &l in labels {
        if (l as usize) < NUM_CLASSES {
            h[l as usize] += 1;
        }
    }
    h
}
