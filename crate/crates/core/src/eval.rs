//! Turning label scores into per-pixel maps and scoring them.
//!
//! The chain is: score matrix over regions -> hard category per region ->
//! rendered per-pixel label maps -> per-category pixel accuracy against
//! ground truth. Accuracy is the recall of each category over its own
//! ground-truth pixels (in percent), averaged with equal weight over the
//! categories that actually occur; void pixels never count for or against.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::raster::LabelMap;
use crate::segment::RegionMap;
use crate::Mat;

/// Hard per-region decisions plus a diagnostic for rows with no evidence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    /// Chosen category per region (row of the score matrix).
    pub categories: Vec<usize>,
    /// Rows whose maximum score was not positive; they default to category 0.
    pub zero_rows: usize,
}

/// Per-category accuracies in percent and their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    /// `None` for categories with no non-void ground-truth pixels.
    pub per_category: Vec<Option<f64>>,
    pub average: f64,
}

/// Everything produced by scoring one run: hard labels, rendered maps,
/// and the accuracy bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseResult {
    pub categories: Vec<usize>,
    pub zero_rows: usize,
    pub label_maps: Vec<LabelMap>,
    pub accuracy: AccuracyReport,
}

/// Pick the best-scoring category per row.
///
/// Ties break toward the lowest category index. A row whose maximum is not
/// positive carries no usable evidence; it is assigned category 0 and
/// counted in [`LabelAssignment::zero_rows`].
pub fn assign_labels(scores: &Mat) -> Result<LabelAssignment> {
    if scores.nrows() == 0 || scores.ncols() == 0 {
        return Err(Error::invalid("score matrix must be non-empty"));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("score matrix must be finite"));
    }
    let mut categories = Vec::with_capacity(scores.nrows());
    let mut zero_rows = 0usize;
    for i in 0..scores.nrows() {
        let mut best = 0usize;
        let mut best_score = scores[(i, 0)];
        for j in 1..scores.ncols() {
            if scores[(i, j)] > best_score {
                best = j;
                best_score = scores[(i, j)];
            }
        }
        if best_score <= 0.0 {
            categories.push(0);
            zero_rows += 1;
        } else {
            categories.push(best);
        }
    }
    Ok(LabelAssignment {
        categories,
        zero_rows,
    })
}

/// Paint per-region categories back onto pixels, one map per image.
///
/// `categories` is ordered image by image: the first
/// `region_maps[0].num_regions()` entries belong to image 0, and so on.
pub fn render_label_maps(region_maps: &[RegionMap], categories: &[usize]) -> Result<Vec<LabelMap>> {
    let total: usize = region_maps.iter().map(RegionMap::num_regions).sum();
    if total != categories.len() {
        return Err(Error::invalid(
            "category count does not match the total region count",
        ));
    }
    if let Some(&bad) = categories.iter().find(|&&c| c >= LabelMap::VOID as usize) {
        return Err(Error::invalid(alloc::format!(
            "category {bad} does not fit an 8-bit label map with void = {}",
            LabelMap::VOID
        )));
    }
    let mut maps = Vec::with_capacity(region_maps.len());
    let mut offset = 0usize;
    for rm in region_maps {
        let mut map = LabelMap::filled(rm.width(), rm.height(), 0)?;
        for y in 0..rm.height() {
            for x in 0..rm.width() {
                let region = rm.label(x, y) as usize;
                map.set(x, y, categories[offset + region] as u8);
            }
        }
        offset += rm.num_regions();
        maps.push(map);
    }
    Ok(maps)
}

/// Score predicted maps against ground truth.
///
/// For each category `c`, accuracy is `100 * correct / total` over the
/// ground-truth pixels of `c`, skipping pixels whose ground truth equals
/// `void_index`. The average weights every occurring category equally,
/// regardless of pixel share.
pub fn evaluate_pixel_accuracy(
    predicted: &[LabelMap],
    ground_truth: &[LabelMap],
    void_index: u8,
) -> Result<AccuracyReport> {
    if predicted.len() != ground_truth.len() || predicted.is_empty() {
        return Err(Error::invalid(
            "need the same non-zero number of predicted and ground-truth maps",
        ));
    }
    let mut total = [0u64; 256];
    let mut correct = [0u64; 256];
    for (pred, gt) in predicted.iter().zip(ground_truth) {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(Error::invalid("prediction and ground truth sizes differ"));
        }
        for (&p, &g) in pred.raw().iter().zip(gt.raw()) {
            if g == void_index {
                continue;
            }
            total[g as usize] += 1;
            if p == g {
                correct[g as usize] += 1;
            }
        }
    }
    let highest = match (0..256).rev().find(|&c| total[c] > 0) {
        Some(c) => c,
        None => {
            return Err(Error::invalid(
                "ground truth contains no non-void pixels",
            ))
        }
    };
    let mut per_category = Vec::with_capacity(highest + 1);
    let mut sum = 0.0;
    let mut occurring = 0usize;
    for c in 0..=highest {
        if total[c] == 0 {
            per_category.push(None);
        } else {
            let acc = 100.0 * correct[c] as f64 / total[c] as f64;
            per_category.push(Some(acc));
            sum += acc;
            occurring += 1;
        }
    }
    Ok(AccuracyReport {
        per_category,
        average: sum / occurring as f64,
    })
}

/// One-stop scoring: assign hard labels, render them, and evaluate against
/// ground truth with the standard void index.
pub fn parse_and_evaluate(
    scores: &Mat,
    region_maps: &[RegionMap],
    ground_truth: &[LabelMap],
) -> Result<ParseResult> {
    if region_maps.len() != ground_truth.len() {
        return Err(Error::invalid(
            "need one ground-truth map per region map",
        ));
    }
    let assignment = assign_labels(scores)?;
    let label_maps = render_label_maps(region_maps, &assignment.categories)?;
    let accuracy = evaluate_pixel_accuracy(&label_maps, ground_truth, LabelMap::VOID)?;
    Ok(ParseResult {
        categories: assignment.categories,
        zero_rows: assignment.zero_rows,
        label_maps,
        accuracy,
    })
}
