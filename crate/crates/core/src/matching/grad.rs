//! Analytic gradients of the weighted set loss with the assignment held
//! fixed, and a central-difference checker for them.

use super::{clamped_objectness, loss_for_assignment, loss_h, pad_targets, LossWeights, RngState};
use crate::error::Result;
use crate::geometry::{giou_grad, BBox, PredBox, ScoredBox, TargetBox};

/// Gradient of the total loss with respect to each prediction's
/// `(cx, cy, w, h, l_obj, l_noobj)` for a fixed assignment.
pub fn grad_for_assignment(targets: &[TargetBox], preds: &[PredBox], assignment: &[usize], w: &LossWeights) -> Vec<[f64; 6]> {
    let k = preds.len().max(1) as f64;
    preds
        .iter()
        .zip(assignment)
        .map(|(pred, &t)| {
            let target = &targets[t];
            let mut g = [0.0; 6];
            let (p, clamped) = clamped_objectness(pred);
            if !clamped {
                // d(-ln p)/dz = -(1 - p), d(-ln(1 - p))/dz = p, with z = l_obj - l_noobj
                let dz = if target.is_object { -(1.0 - p) } else { p };
                g[4] = w.cls * dz / k;
                g[5] = -w.cls * dz / k;
            }
            if target.is_object {
                let pb = pred.bbox.as_array();
                let tb = target.bbox.as_array();
                let dg = giou_grad(&pred.bbox, &target.bbox);
                for i in 0..4 {
                    let sign = if pb[i] > tb[i] {
                        1.0
                    } else if pb[i] < tb[i] {
                        -1.0
                    } else {
                        0.0
                    };
                    g[i] = (w.bbox * sign - w.giou * dg[i]) / k;
                }
            }
            g
        })
        .collect()
}

/// Match, then differentiate with the matching frozen.
pub fn grad_loss_h(boxes: &[ScoredBox], preds: &[PredBox], k: usize, w: &LossWeights) -> Result<Vec<[f64; 6]>> {
    let (_, m) = loss_h(boxes, preds, k, w)?;
    Ok(grad_for_assignment(&pad_targets(boxes, k), preds, &m.assignment, w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiffReport {
    /// Worst error: relative, or absolute when both gradients are below
    /// [`FiniteDiffReport::ABSOLUTE_FLOOR`].
    pub max_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl FiniteDiffReport {
    pub const ABSOLUTE_FLOOR: f64 = 1e-4;
}

/// Corner differences that place a min/max or |.| kink, per axis.
fn near_kink(pred: &PredBox, target: &TargetBox, param: usize, reach: f64) -> bool {
    let (pb, tb) = (pred.bbox.as_array(), target.bbox.as_array());
    if (pb[param] - tb[param]).abs() < reach {
        return true;
    }
    let (a, b) = (pred.bbox.corners(), target.bbox.corners());
    let diffs = if param.is_multiple_of(2) {
        [a.x0 - b.x0, a.x1 - b.x1, a.x1 - b.x0, a.x0 - b.x1]
    } else {
        [a.y0 - b.y0, a.y1 - b.y1, a.y1 - b.y0, a.y0 - b.y1]
    };
    diffs.iter().any(|d| d.abs() < reach)
}

/// Compare [`grad_loss_h`] with central differences of step `step`.
///
/// The matching is computed once and frozen. Box parameters within `2·step`
/// of an L1 or GIoU kink are skipped, as are logits whose perturbation
/// crosses the probability clamp.
pub fn finite_diff_check(boxes: &[ScoredBox], preds: &[PredBox], k: usize, w: &LossWeights, step: f64) -> Result<FiniteDiffReport> {
    if !(step > 0.0) {
        return Err(crate::error::Error::InvalidArgument(format!("step {step} must be > 0")));
    }
    let (_, m) = loss_h(boxes, preds, k, w)?;
    let targets = pad_targets(boxes, k);
    let analytic = grad_for_assignment(&targets, preds, &m.assignment, w);

    let mut report = FiniteDiffReport {
        max_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut work = preds.to_vec();
    for (i, pred) in preds.iter().enumerate() {
        let target = &targets[m.assignment[i]];
        for param in 0..6 {
            let base = pred.params();
            let mut hi = base;
            let mut lo = base;
            hi[param] += step;
            lo[param] -= step;
            let (hi_pred, lo_pred) = (PredBox::from_params(hi), PredBox::from_params(lo));

            let skip = if param < 4 {
                target.is_object && near_kink(pred, target, param, 2.0 * step)
            } else {
                clamped_objectness(&hi_pred).1 || clamped_objectness(&lo_pred).1
            };
            if skip {
                report.skipped += 1;
                continue;
            }

            work[i] = hi_pred;
            let f_hi = loss_for_assignment(&targets, &work, &m.assignment, w).total;
            work[i] = lo_pred;
            let f_lo = loss_for_assignment(&targets, &work, &m.assignment, w).total;
            work[i] = *pred;

            let numeric = (f_hi - f_lo) / (2.0 * step);
            let a = analytic[i][param];
            let scale = a.abs().max(numeric.abs());
            let err = if scale < FiniteDiffReport::ABSOLUTE_FLOOR {
                (a - numeric).abs()
            } else {
                (a - numeric).abs() / scale
            };
            report.max_error = report.max_error.max(err);
            report.checked += 1;
        }
    }
    Ok(report)
}

/// A random gradient-check problem: up to `k + 1` scored target boxes and
/// `k` predictions, `k` in `1..=5`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCase {
    pub boxes: Vec<ScoredBox>,
    pub preds: Vec<PredBox>,
    pub k: usize,
}

pub fn random_grad_case(rng: &mut RngState) -> GradCase {
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.uniform();
    let k = 1 + (u(0.0, 5.0) as usize).min(4);
    let n_boxes = (u(0.0, (k + 2) as f64) as usize).min(k + 1);
    let rand_box = |u: &mut dyn FnMut(f64, f64) -> f64| BBox::new(u(0.15, 0.85), u(0.15, 0.85), u(0.05, 0.4), u(0.05, 0.4));
    let boxes = (0..n_boxes)
        .map(|_| {
            let b = rand_box(&mut u);
            ScoredBox::new(b, u(0.05, 1.0))
        })
        .collect();
    let preds = (0..k)
        .map(|_| {
            let b = rand_box(&mut u);
            PredBox::new(b, u(-3.0, 3.0), u(-3.0, 3.0))
        })
        .collect();
    GradCase { boxes, preds, k }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::matching::RngState;

    fn fixture() -> (Vec<ScoredBox>, Vec<PredBox>) {
        let boxes = vec![
            ScoredBox::new(BBox::new(0.3, 0.35, 0.2, 0.25), 0.9),
            ScoredBox::new(BBox::new(0.7, 0.6, 0.3, 0.2), 0.6),
        ];
        let preds = vec![
            PredBox::new(BBox::new(0.62, 0.55, 0.25, 0.3), 0.3, -0.2),
            PredBox::new(BBox::new(0.42, 0.3, 0.15, 0.2), 1.2, 0.1),
            PredBox::new(BBox::new(0.15, 0.8, 0.1, 0.12), -0.5, 0.4),
        ];
        (boxes, preds)
    }

    #[test]
    fn zero_gradient_on_coincident_box() {
        let t = BBox::new(0.4, 0.5, 0.2, 0.3);
        let g = grad_loss_h(&[ScoredBox::new(t, 1.0)], &[PredBox::new(t, 0.5, 0.0)], 1, &LossWeights::default()).unwrap();
        assert_eq!(&g[0][..4], &[0.0; 4]);
    }

    #[test]
    fn classification_derivative() {
        let t = BBox::new(0.4, 0.5, 0.2, 0.3);
        let pred = PredBox::new(BBox::new(0.45, 0.5, 0.2, 0.3), 0.3, -0.1);
        let others = [PredBox::new(BBox::new(0.8, 0.8, 0.1, 0.1), -2.0, 0.0)];
        let preds = [pred, others[0]];
        let w = LossWeights::new(1.0, 0.0, 0.0).unwrap();
        let g = grad_loss_h(&[ScoredBox::new(t, 1.0)], &preds, 2, &w).unwrap();
        let p = pred.objectness();
        assert!((g[0][4] + (1.0 - p) / 2.0).abs() < 1e-15);
        assert!((g[0][5] - (1.0 - p) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn fixture_matches_finite_differences() {
        let (boxes, preds) = fixture();
        let r = finite_diff_check(&boxes, &preds, 3, &LossWeights::default(), 1e-5).unwrap();
        assert!(r.max_error < 1e-4, "{r:?}");
        // pred 0 shares its bottom edge with its target, so cy and h sit on a kink
        assert_eq!((r.checked, r.skipped), (16, 2));
    }

    #[test]
    fn perfect_fit_reports_tiny_absolute_error() {
        let t = [BBox::new(0.3, 0.3, 0.2, 0.2), BBox::new(0.7, 0.6, 0.1, 0.3)];
        let boxes: Vec<ScoredBox> = t.iter().map(|&b| ScoredBox::new(b, 1.0)).collect();
        let preds = [PredBox::new(t[0], 30.0, 0.0), PredBox::new(t[1], 30.0, 0.0)];
        let r = finite_diff_check(&boxes, &preds, 2, &LossWeights::default(), 1e-5).unwrap();
        assert!(r.max_error < 1e-8);
    }

    #[test]
    fn error_shrinks_with_step() {
        let (boxes, preds) = fixture();
        let w = LossWeights::default();
        let errs: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&h| finite_diff_check(&boxes, &preds, 3, &w, h).unwrap().max_error)
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        // second order: halving the step cuts the error by about four
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn random_configurations() {
        let mut rng = RngState::new(3);
        let w = LossWeights::default();
        for _ in 0..200 {
            let GradCase { boxes, preds, k } = random_grad_case(&mut rng);
            assert!(boxes.len() <= k + 1 && preds.len() == k && (1..=5).contains(&k));
            let r = finite_diff_check(&boxes, &preds, k, &w, 1e-5).unwrap();
            assert!(r.max_error < 1e-4, "{r:?}");
        }
    }
}
