//! Scoring predicted detections against ground truth.
//!
//! Matching is greedy in descending confidence with single-use ground truth,
//! the de-facto protocol behind "mAP@0.5". AP integrates the monotone
//! precision envelope over recall (all-point interpolation). Scalar
//! precision and recall are computed at a confidence threshold; AP and mAP
//! always rank the full prediction list.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::annotation::{CategoryId, Detection, FrameAnnotations};
use crate::exec;
use crate::geometry::iou;

/// Detection-level tallies for one category at a confidence threshold.
///
/// `true_positive + false_negative` is the category's ground-truth count;
/// `true_positive + false_positive` is its prediction count at or above the
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

/// One point of the cumulative precision-recall curve, at one prediction
/// rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrCurvePoint {
    pub recall: f64,
    pub precision: f64,
    pub confidence: f64,
}

/// Cumulative PR curve over the ranked prediction list; recall is
/// non-decreasing along `points`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrCurve {
    pub points: Vec<PrCurvePoint>,
}

/// Per-category slice of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryEval {
    pub ap: f64,
    pub counts: ConfusionCounts,
    pub pr_curve: PrCurve,
}

/// Dataset-level evaluation: per-category AP with counts and curves, their
/// mean (mAP@IoU), and scalar precision/recall at `confidence_threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_category: BTreeMap<CategoryId, CategoryEval>,
    pub map_at_50: f64,
    pub precision: f64,
    pub recall: f64,
    pub iou_threshold: f64,
    pub confidence_threshold: f64,
}

/// One ranked prediction after matching, in descending-confidence order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionMatch {
    /// Index into the prediction list handed to [`match_detections`].
    pub prediction_index: usize,
    pub confidence: f64,
    pub category: CategoryId,
    /// Index of the claimed ground-truth detection, if the best same-category
    /// IoU reached the threshold.
    pub matched_gt: Option<usize>,
}

/// Result of matching one prediction list against one ground-truth list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchOutcome {
    /// Predictions in processing order: confidence descending, ties by input
    /// order.
    pub ranked: Vec<PredictionMatch>,
    /// Ground-truth indices no prediction claimed, ascending.
    pub unmatched_gt: Vec<usize>,
}

impl MatchOutcome {
    pub fn ground_truth_count(&self) -> usize {
        let matched = self
            .ranked
            .iter()
            .filter(|m| m.matched_gt.is_some())
            .count();
        matched + self.unmatched_gt.len()
    }

    /// Tallies restricted to predictions with confidence at or above the
    /// threshold. Greedy matching makes that subset self-consistent: a
    /// confidence prefix claims exactly the ground truth it would claim if
    /// matched alone.
    pub fn confusion_at(&self, confidence_threshold: f64) -> ConfusionCounts {
        let mut counts = ConfusionCounts::default();
        for m in &self.ranked {
            if m.confidence < confidence_threshold {
                continue;
            }
            match m.matched_gt {
                Some(_) => counts.true_positive += 1,
                None => counts.false_positive += 1,
            }
        }
        counts.false_negative = self.ground_truth_count() - counts.true_positive;
        counts
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("prediction {index} has no confidence")]
    MissingConfidence { index: usize },
    #[error("prediction frame '{frame_id}' has no ground-truth counterpart")]
    FrameIdMismatch { frame_id: String },
    #[error("no category carries ground truth or predictions")]
    NoCategories,
}

/// Greedy IoU matching. Predictions are processed in descending confidence
/// (ties keep input order); each claims the unclaimed same-category ground
/// truth with the highest IoU, provided that IoU reaches `iou_threshold`.
/// IoU ties go to the lower ground-truth index.
pub fn match_detections(
    predictions: &[Detection],
    ground_truth: &[Detection],
    iou_threshold: f64,
) -> Result<MatchOutcome, EvalError> {
    let mut order: Vec<(usize, f64)> = predictions
        .iter()
        .enumerate()
        .map(|(i, d)| {
            d.confidence
                .map(|c| (i, c))
                .ok_or(EvalError::MissingConfidence { index: i })
        })
        .collect::<Result<_, _>>()?;
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut claimed = vec![false; ground_truth.len()];
    let mut ranked = Vec::with_capacity(order.len());
    for (index, confidence) in order {
        let prediction = &predictions[index];
        let mut best: Option<(usize, f64)> = None;
        for (gt_index, gt) in ground_truth.iter().enumerate() {
            if claimed[gt_index] || gt.category != prediction.category {
                continue;
            }
            let overlap = iou(&prediction.bbox, &gt.bbox);
            // strict comparison keeps the lower ground-truth index on ties
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((gt_index, overlap));
            }
        }
        let matched_gt = match best {
            Some((gt_index, overlap)) if overlap >= iou_threshold => {
                claimed[gt_index] = true;
                Some(gt_index)
            }
            _ => None,
        };
        ranked.push(PredictionMatch {
            prediction_index: index,
            confidence,
            category: prediction.category,
            matched_gt,
        });
    }

    let unmatched_gt = claimed
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| (!c).then_some(i))
        .collect();
    Ok(MatchOutcome {
        ranked,
        unmatched_gt,
    })
}

/// `TP / (TP + FP)`; 1.0 when no predictions were made (none were wrong).
pub fn precision(counts: &ConfusionCounts) -> f64 {
    ratio_or_one(counts.true_positive, counts.false_positive)
}

/// `TP / (TP + FN)`; 1.0 when there were no objects to find.
pub fn recall(counts: &ConfusionCounts) -> f64 {
    ratio_or_one(counts.true_positive, counts.false_negative)
}

fn ratio_or_one(hits: usize, misses: usize) -> f64 {
    let denominator = hits + misses;
    if denominator == 0 {
        1.0
    } else {
        hits as f64 / denominator as f64
    }
}

/// Average precision for one category: rank that category's predictions,
/// build the cumulative PR curve, and integrate the monotone precision
/// envelope over recall. A category with ground truth but no true positive
/// scores 0; so does one with predictions but no ground truth.
pub fn average_precision(
    predictions: &[Detection],
    ground_truth: &[Detection],
    category: CategoryId,
    iou_threshold: f64,
) -> Result<f64, EvalError> {
    let preds: Vec<Detection> = predictions
        .iter()
        .filter(|d| d.category == category)
        .cloned()
        .collect();
    let gt: Vec<Detection> = ground_truth
        .iter()
        .filter(|d| d.category == category)
        .cloned()
        .collect();
    let outcome = match_detections(&preds, &gt, iou_threshold)?;
    let flags: Vec<bool> = outcome
        .ranked
        .iter()
        .map(|m| m.matched_gt.is_some())
        .collect();
    Ok(ap_from_ranked(&flags, gt.len()))
}

/// Integrate the PR curve of a ranked true-positive sequence: precision is
/// replaced by the maximum precision at any equal-or-higher recall, then
/// summed over the recall increments.
fn ap_from_ranked(is_true_positive: &[bool], ground_truth_count: usize) -> f64 {
    if ground_truth_count == 0 || is_true_positive.is_empty() {
        return 0.0;
    }

    let mut cumulative = 0usize;
    let mut recalls = Vec::with_capacity(is_true_positive.len());
    let mut precisions = Vec::with_capacity(is_true_positive.len());
    for (rank, &tp) in is_true_positive.iter().enumerate() {
        if tp {
            cumulative += 1;
        }
        recalls.push(cumulative as f64 / ground_truth_count as f64);
        precisions.push(cumulative as f64 / (rank + 1) as f64);
    }

    let mut envelope = precisions;
    for rank in (0..envelope.len() - 1).rev() {
        if envelope[rank + 1] > envelope[rank] {
            envelope[rank] = envelope[rank + 1];
        }
    }

    let mut ap = 0.0;
    let mut previous_recall = 0.0;
    for (recall, max_precision) in recalls.iter().zip(&envelope) {
        ap += (recall - previous_recall) * max_precision;
        previous_recall = *recall;
    }
    ap
}

/// Arithmetic mean of per-category AP values. Categories absent from both
/// ground truth and predictions must already be excluded by the caller.
pub fn mean_average_precision(
    per_category_ap: &BTreeMap<CategoryId, f64>,
) -> Result<f64, EvalError> {
    if per_category_ap.is_empty() {
        return Err(EvalError::NoCategories);
    }
    Ok(per_category_ap.values().sum::<f64>() / per_category_ap.len() as f64)
}

/// A prediction's rank key across the whole dataset, after per-frame
/// matching.
struct RankedRecord {
    confidence: f64,
    frame_order: usize,
    prediction_index: usize,
    is_true_positive: bool,
}

#[derive(Default)]
struct CategoryAccumulator {
    records: Vec<RankedRecord>,
    ground_truth_count: usize,
}

/// Match every prediction frame against its ground-truth frame and reduce to
/// a dataset report.
///
/// Prediction frame IDs must be a subset of ground-truth frame IDs;
/// ground-truth frames without a prediction frame contribute false negatives
/// only. AP and mAP rank all predictions; the scalar precision/recall count
/// only predictions with confidence at or above `confidence_threshold`. The
/// dataset ranking orders ties by ground-truth frame order, then by the
/// prediction's index within its frame.
pub fn evaluate_dataset(
    pred_frames: &[FrameAnnotations],
    gt_frames: &[FrameAnnotations],
    iou_threshold: f64,
    confidence_threshold: f64,
) -> Result<EvalReport, EvalError> {
    let gt_ids: BTreeSet<&str> = gt_frames.iter().map(|f| f.frame_id.as_str()).collect();
    for frame in pred_frames {
        if !gt_ids.contains(frame.frame_id.as_str()) {
            return Err(EvalError::FrameIdMismatch {
                frame_id: frame.frame_id.clone(),
            });
        }
    }
    let preds_by_id: BTreeMap<&str, &FrameAnnotations> = pred_frames
        .iter()
        .map(|f| (f.frame_id.as_str(), f))
        .collect();

    // Frames are independent; match them in parallel, then reduce in frame
    // order so ties and errors resolve deterministically.
    type FramePart = (CategoryId, Vec<(usize, f64, bool)>, usize);
    let per_frame: Vec<Result<Vec<FramePart>, EvalError>> =
        exec::map_slice(gt_frames, |gt_frame| {
            let empty = Vec::new();
            let pred_detections = preds_by_id
                .get(gt_frame.frame_id.as_str())
                .map_or(&empty, |f| &f.detections);

            let mut categories: BTreeSet<CategoryId> = BTreeSet::new();
            categories.extend(gt_frame.detections.iter().map(|d| d.category));
            categories.extend(pred_detections.iter().map(|d| d.category));

            let mut parts = Vec::with_capacity(categories.len());
            for category in categories {
                let pred_indices: Vec<usize> = pred_detections
                    .iter()
                    .enumerate()
                    .filter_map(|(i, d)| (d.category == category).then_some(i))
                    .collect();
                let preds: Vec<Detection> = pred_indices
                    .iter()
                    .map(|&i| pred_detections[i].clone())
                    .collect();
                let gt: Vec<Detection> = gt_frame
                    .detections
                    .iter()
                    .filter(|d| d.category == category)
                    .cloned()
                    .collect();
                let outcome = match_detections(&preds, &gt, iou_threshold)?;
                let records = outcome
                    .ranked
                    .iter()
                    .map(|m| {
                        (
                            pred_indices[m.prediction_index],
                            m.confidence,
                            m.matched_gt.is_some(),
                        )
                    })
                    .collect();
                parts.push((category, records, gt.len()));
            }
            Ok(parts)
        });

    let mut accumulators: BTreeMap<CategoryId, CategoryAccumulator> = BTreeMap::new();
    for (frame_order, frame_result) in per_frame.into_iter().enumerate() {
        for (category, records, gt_count) in frame_result? {
            let acc = accumulators.entry(category).or_default();
            acc.ground_truth_count += gt_count;
            acc.records.extend(records.into_iter().map(
                |(prediction_index, confidence, is_true_positive)| RankedRecord {
                    confidence,
                    frame_order,
                    prediction_index,
                    is_true_positive,
                },
            ));
        }
    }
    if accumulators.is_empty() {
        return Err(EvalError::NoCategories);
    }

    let mut per_category = BTreeMap::new();
    let mut pooled = ConfusionCounts::default();
    for (category, mut acc) in accumulators {
        acc.records.sort_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then(a.frame_order.cmp(&b.frame_order))
                .then(a.prediction_index.cmp(&b.prediction_index))
        });

        let flags: Vec<bool> = acc.records.iter().map(|r| r.is_true_positive).collect();
        let ap = ap_from_ranked(&flags, acc.ground_truth_count);

        let mut points = Vec::with_capacity(acc.records.len());
        let mut cumulative = 0usize;
        let mut counts = ConfusionCounts::default();
        for (rank, record) in acc.records.iter().enumerate() {
            if record.is_true_positive {
                cumulative += 1;
            }
            points.push(PrCurvePoint {
                recall: if acc.ground_truth_count == 0 {
                    0.0
                } else {
                    cumulative as f64 / acc.ground_truth_count as f64
                },
                precision: cumulative as f64 / (rank + 1) as f64,
                confidence: record.confidence,
            });
            if record.confidence >= confidence_threshold {
                match record.is_true_positive {
                    true => counts.true_positive += 1,
                    false => counts.false_positive += 1,
                }
            }
        }
        counts.false_negative = acc.ground_truth_count - counts.true_positive;

        pooled.true_positive += counts.true_positive;
        pooled.false_positive += counts.false_positive;
        pooled.false_negative += counts.false_negative;
        per_category.insert(
            category,
            CategoryEval {
                ap,
                counts,
                pr_curve: PrCurve { points },
            },
        );
    }

    let ap_by_category: BTreeMap<CategoryId, f64> =
        per_category.iter().map(|(&c, e)| (c, e.ap)).collect();
    Ok(EvalReport {
        map_at_50: mean_average_precision(&ap_by_category)?,
        precision: precision(&pooled),
        recall: recall(&pooled),
        iou_threshold,
        confidence_threshold,
        per_category,
    })
}
