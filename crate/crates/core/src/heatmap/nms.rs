use crate::geometry::{iou, ScoredBox};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.05;
pub const DEFAULT_SCORE_RATIO: f64 = 0.5;

/// Greedy non-maximum suppression.
///
/// Boxes scoring below `score_ratio` times the best score are dropped first.
/// The rest are visited in descending score order (ties by input index) and
/// a box is suppressed when its IoU with an already kept box is at least
/// `iou_thresh`. The output keeps the visiting order.
pub fn nms(boxes: &[ScoredBox], iou_thresh: f64, score_ratio: f64) -> Vec<ScoredBox> {
    let Some(best) = boxes.iter().map(|b| b.score).max_by(f64::total_cmp) else {
        return Vec::new();
    };
    let floor = score_ratio * best;
    let mut order: Vec<usize> = (0..boxes.len()).filter(|&i| boxes[i].score >= floor).collect();
    order.sort_by(|&a, &b| boxes[b].score.total_cmp(&boxes[a].score).then(a.cmp(&b)));

    let mut kept: Vec<ScoredBox> = Vec::with_capacity(order.len());
    for i in order {
        let candidate = boxes[i];
        if kept.iter().all(|k| iou(&k.bbox, &candidate.bbox) < iou_thresh) {
            kept.push(candidate);
        }
    }
    kept
}
