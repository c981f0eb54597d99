//! Confusion-matrix accounting and the four binary segmentation measures:
//! precision, recall, F1, and intersection-over-union.
//!
//! All metrics are micro-averaged over global pixel counts. Any 0/0 case
//! yields 0 for that metric so batch reports stay total and sortable.

use serde::Serialize;

use crate::error::Result;
use crate::parallel::map_rows;
use crate::raster::{BinaryMask, require_same_grid};

/// Raw pixel counts over cells valid in both masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// The four accuracy measures, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
}

/// Count agreement between a predicted and a reference mask.
///
/// Cells invalid in either mask are excluded entirely.
pub fn confusion(pred: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionCounts> {
    require_same_grid(&pred.spec, &truth.spec, "confusion operands")?;
    let spec = pred.spec;
    let partials = map_rows(spec.height, |row| {
        let mut c = ConfusionCounts::default();
        for col in 0..spec.width {
            let i = spec.index(row, col);
            if !(pred.valid[i] && truth.valid[i]) {
                continue;
            }
            match (pred.bits[i], truth.bits[i]) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_pos += 1,
                (false, true) => c.false_neg += 1,
                (false, false) => c.true_neg += 1,
            }
        }
        c
    });
    Ok(partials
        .into_iter()
        .fold(ConfusionCounts::default(), |a, b| ConfusionCounts {
            true_pos: a.true_pos + b.true_pos,
            false_pos: a.false_pos + b.false_pos,
            false_neg: a.false_neg + b.false_neg,
            true_neg: a.true_neg + b.true_neg,
        }))
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

/// Derive the four measures from raw counts.
pub fn metrics(counts: &ConfusionCounts) -> MetricsReport {
    let tp = counts.true_pos;
    MetricsReport {
        precision: ratio(tp, tp + counts.false_pos),
        recall: ratio(tp, tp + counts.false_neg),
        f1: ratio(2 * tp, 2 * tp + counts.false_pos + counts.false_neg),
        iou: ratio(tp, tp + counts.false_pos + counts.false_neg),
    }
}
