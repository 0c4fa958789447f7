use super::{rotated_iou, DetectionSet, GeometryError};

/// Average precision of `predictions` against `gt` at a single IoU threshold.
///
/// Predictions are ranked by descending score (ties keep input order) and
/// each is matched to the highest-IoU still-unmatched ground-truth box with
/// IoU at or above the threshold. AP is the all-point interpolated area
/// under the precision-recall curve.
///
/// Conventions for empty inputs: no ground truth and no predictions is a
/// perfect 1.0; no ground truth with predictions is 0.0.
pub fn average_precision(predictions: &DetectionSet, gt: &DetectionSet, iou_threshold: f64) -> Result<f64, GeometryError> {
    if gt.boxes.is_empty() {
        return Ok(if predictions.boxes.is_empty() { 1.0 } else { 0.0 });
    }
    if predictions.boxes.is_empty() {
        return Ok(0.0);
    }

    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&i, &j| predictions.boxes[j].score.total_cmp(&predictions.boxes[i].score).then(i.cmp(&j)));

    let mut taken = vec![false; gt.len()];
    let mut tp_flags = Vec::with_capacity(order.len());
    for &i in &order {
        let pred = &predictions.boxes[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt_box) in gt.boxes.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let iou = rotated_iou(pred, gt_box)?;
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
        }
        tp_flags.push(best.is_some());
    }

    let total_gt = gt.len() as f64;
    let mut recalls = Vec::with_capacity(tp_flags.len());
    let mut precisions = Vec::with_capacity(tp_flags.len());
    let mut tp = 0usize;
    for (rank, &hit) in tp_flags.iter().enumerate() {
        tp += hit as usize;
        recalls.push(tp as f64 / total_gt);
        precisions.push(tp as f64 / (rank + 1) as f64);
    }
    // precision envelope, right to left
    for k in (0..precisions.len().saturating_sub(1)).rev() {
        precisions[k] = precisions[k].max(precisions[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recalls.iter().zip(&precisions) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    Ok(ap.clamp(0.0, 1.0))
}
