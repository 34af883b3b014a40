//! Set-prediction losses: target padding, Hungarian matching, the weighted
//! classification / L1 / GIoU loss, its union-box variant, and analytic
//! gradients checked against finite differences.

mod grad;
mod hungarian;

pub use grad::{finite_diff_check, grad_for_assignment, grad_loss_h, random_grad_case, FiniteDiffReport, GradCase};
pub use hungarian::{hungarian, CostMatrix, MatchResult};

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::geometry::{giou, union_box, PredBox, ScoredBox, TargetBox};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub cls: f64,
    pub bbox: f64,
    pub giou: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            cls: 2.0,
            bbox: 5.0,
            giou: 2.0,
        }
    }
}

impl LossWeights {
    pub fn new(cls: f64, bbox: f64, giou: f64) -> Result<Self> {
        if [cls, bbox, giou].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("loss weights ({cls}, {bbox}, {giou}) must be >= 0")));
        }
        Ok(Self { cls, bbox, giou })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            cls: self.cls * c,
            bbox: self.bbox * c,
            giou: self.giou * c,
        }
    }
}

/// Per-term losses, each already divided by the number of predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub cls: f64,
    pub bbox: f64,
    pub giou: f64,
    pub total: f64,
    pub weights: LossWeights,
}

/// Seedable 64-bit generator used for the union-box coin flip.
#[derive(Debug, Clone)]
pub struct RngState(SplitMix64);

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Pad with no-object targets up to `k`, or keep the `k` best-scored boxes.
pub fn pad_targets(boxes: &[ScoredBox], k: usize) -> Vec<TargetBox> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    if boxes.len() > k {
        order.sort_by(|&a, &b| boxes[b].score.total_cmp(&boxes[a].score).then(a.cmp(&b)));
        order.truncate(k);
    }
    let mut targets: Vec<TargetBox> = order.iter().map(|&i| TargetBox::object(boxes[i].bbox)).collect();
    targets.resize(k, TargetBox::padding());
    targets
}

pub(crate) fn clamped_objectness(p: &PredBox) -> (f64, bool) {
    let raw = p.objectness();
    let c = raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (c, c != raw)
}

fn l1(pred: &PredBox, target: &TargetBox) -> f64 {
    pred.bbox
        .as_array()
        .iter()
        .zip(target.bbox.as_array())
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// Unweighted `(cls, l1, 1 - giou)` for one pair. Box terms are zero for
/// no-object targets.
fn pair_terms(target: &TargetBox, pred: &PredBox) -> (f64, f64, f64) {
    let (p, _) = clamped_objectness(pred);
    if target.is_object {
        (-p.ln(), l1(pred, target), 1.0 - giou(&pred.bbox, &target.bbox))
    } else {
        (-(1.0 - p).ln(), 0.0, 0.0)
    }
}

pub fn match_cost(target: &TargetBox, pred: &PredBox, w: &LossWeights) -> f64 {
    let (c, b, g) = pair_terms(target, pred);
    w.cls * c + w.bbox * b + w.giou * g
}

/// Rows are predictions, columns are targets.
pub fn cost_matrix(targets: &[TargetBox], preds: &[PredBox], w: &LossWeights) -> Result<CostMatrix> {
    if targets.len() != preds.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} targets", preds.len()),
            actual: format!("{} targets", targets.len()),
        });
    }
    let n = preds.len();
    let data = preds
        .iter()
        .flat_map(|p| targets.iter().map(move |t| match_cost(t, p, w)))
        .collect();
    CostMatrix::new(n, data)
}

/// Loss for a fixed assignment (`assignment[pred] = target`).
pub fn loss_for_assignment(targets: &[TargetBox], preds: &[PredBox], assignment: &[usize], w: &LossWeights) -> LossBreakdown {
    let k = preds.len().max(1) as f64;
    let (mut cls, mut bbox, mut gi) = (0.0, 0.0, 0.0);
    for (pred, &t) in preds.iter().zip(assignment) {
        let (c, b, g) = pair_terms(&targets[t], pred);
        cls += c;
        bbox += b;
        gi += g;
    }
    let (cls, bbox, giou) = (cls / k, bbox / k, gi / k);
    LossBreakdown {
        cls,
        bbox,
        giou,
        total: w.cls * cls + w.bbox * bbox + w.giou * giou,
        weights: *w,
    }
}

/// Match `preds` to already padded `targets` and evaluate the loss.
pub fn loss_against_targets(targets: &[TargetBox], preds: &[PredBox], w: &LossWeights) -> Result<(LossBreakdown, MatchResult)> {
    let m = hungarian(&cost_matrix(targets, preds, w)?)?;
    Ok((loss_for_assignment(targets, preds, &m.assignment, w), m))
}

fn check_k(preds: &[PredBox], k: usize) -> Result<()> {
    if k == 0 || preds.len() != k {
        return Err(Error::InvalidArgument(format!("expected k = {k} >= 1 predictions, got {}", preds.len())));
    }
    Ok(())
}

pub fn loss_h(boxes: &[ScoredBox], preds: &[PredBox], k: usize, w: &LossWeights) -> Result<(LossBreakdown, MatchResult)> {
    check_k(preds, k)?;
    loss_against_targets(&pad_targets(boxes, k), preds, w)
}

/// Outcome of the union-box variant.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionLoss {
    pub breakdown: LossBreakdown,
    pub matching: MatchResult,
    pub targets: Vec<TargetBox>,
    pub used_union: bool,
}

/// With a uniform draw `p >= 0.5` the target set is replaced by its single
/// enclosing box; otherwise this is [`loss_h`].
pub fn loss_h_bu(boxes: &[ScoredBox], preds: &[PredBox], k: usize, w: &LossWeights, rng: &mut RngState) -> Result<UnionLoss> {
    if boxes.is_empty() {
        return Err(Error::EmptyBoxSet);
    }
    check_k(preds, k)?;
    let used_union = rng.uniform() >= 0.5;
    let targets = if used_union {
        let u = union_box(boxes.iter().map(|b| &b.bbox))?;
        let best = boxes.iter().map(|b| b.score).fold(0.0, f64::max);
        pad_targets(&[ScoredBox::new(u, best)], k)
    } else {
        pad_targets(boxes, k)
    };
    let (breakdown, matching) = loss_against_targets(&targets, preds, w)?;
    Ok(UnionLoss {
        breakdown,
        matching,
        targets,
        used_union,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn sb(cx: f64, cy: f64, w: f64, h: f64, s: f64) -> ScoredBox {
        ScoredBox::new(BBox::new(cx, cy, w, h), s)
    }

    fn pred(cx: f64, cy: f64, w: f64, h: f64, lo: f64) -> PredBox {
        PredBox::new(BBox::new(cx, cy, w, h), lo, 0.0)
    }

    #[test]
    fn rng_is_reproducible() {
        let mut a = RngState::new(42);
        let mut b = RngState::new(42);
        let xs: Vec<u64> = (0..5).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..5).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        let u = RngState::new(0).uniform();
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn pad_examples() {
        let b = [sb(0.2, 0.2, 0.1, 0.1, 0.9), sb(0.6, 0.6, 0.2, 0.2, 0.5)];
        let t = pad_targets(&b, 4);
        assert_eq!(t.len(), 4);
        assert!(t[0].is_object && t[1].is_object);
        assert_eq!(t[2], TargetBox::padding());
        assert_eq!(t[3].bbox, BBox::default());

        assert_eq!(pad_targets(&b, 2), vec![TargetBox::object(b[0].bbox), TargetBox::object(b[1].bbox)]);

        let five: Vec<ScoredBox> = [0.9, 0.8, 0.7, 0.2, 0.1]
            .iter()
            .enumerate()
            .map(|(i, &s)| sb(0.1 * i as f64 + 0.1, 0.5, 0.05, 0.05, s))
            .collect();
        let kept = pad_targets(&five, 3);
        assert_eq!(kept.iter().map(|t| t.bbox).collect::<Vec<_>>(), vec![five[0].bbox, five[1].bbox, five[2].bbox]);
    }

    #[test]
    fn match_cost_examples() {
        let w = LossWeights::default();
        let t = TargetBox::object(BBox::new(0.5, 0.5, 0.2, 0.3));
        let exact = PredBox::new(t.bbox, 40.0, 0.0);
        assert!(match_cost(&t, &exact, &w) < 1e-6);

        let half = pred(0.3, 0.3, 0.1, 0.1, 0.0);
        assert!((match_cost(&TargetBox::padding(), &half, &w) - 2.0 * 2f64.ln()).abs() < 1e-12);

        let p = PredBox::new(BBox::new(0.45, 0.52, 0.25, 0.2), 0.7, -0.4);
        let prob = 1.0 / (1.0 + (-(1.1f64)).exp());
        let l1 = 0.05 + 0.02 + 0.05 + 0.1;
        let expected = 2.0 * -prob.ln() + 5.0 * l1 + 2.0 * (1.0 - giou(&p.bbox, &t.bbox));
        assert!((match_cost(&t, &p, &w) - expected).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit_is_near_zero() {
        let b = [sb(0.3, 0.3, 0.2, 0.2, 1.0), sb(0.7, 0.6, 0.1, 0.3, 0.8)];
        let preds = [PredBox::new(b[1].bbox, 30.0, 0.0), PredBox::new(b[0].bbox, 30.0, 0.0)];
        let (l, m) = loss_h(&b, &preds, 2, &LossWeights::default()).unwrap();
        assert!(l.total < 1e-5);
        assert_eq!(m.assignment, vec![1, 0]);
    }

    #[test]
    fn empty_targets_give_classification_only() {
        let preds = [pred(0.3, 0.3, 0.1, 0.1, 0.5), pred(0.6, 0.6, 0.1, 0.2, -1.0)];
        let (l, _) = loss_h(&[], &preds, 2, &LossWeights::default()).unwrap();
        assert_eq!(l.bbox, 0.0);
        assert_eq!(l.giou, 0.0);
        let expected = preds.iter().map(|p| -(1.0 - p.objectness()).ln()).sum::<f64>() / 2.0;
        assert!((l.cls - expected).abs() < 1e-12);
        assert!((l.total - 2.0 * expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrong_prediction_count() {
        let preds = [pred(0.3, 0.3, 0.1, 0.1, 0.5)];
        assert!(loss_h(&[], &preds, 2, &LossWeights::default()).is_err());
        assert!(loss_h(&[], &[], 0, &LossWeights::default()).is_err());
    }

    #[test]
    fn union_branch_semantics() {
        let b = [sb(0.25, 0.25, 0.1, 0.1, 0.9), sb(0.7, 0.6, 0.2, 0.2, 0.7)];
        let preds = [pred(0.4, 0.4, 0.3, 0.3, 1.0), pred(0.5, 0.5, 0.2, 0.1, -1.0), pred(0.1, 0.8, 0.1, 0.1, 0.0)];
        let w = LossWeights::default();

        let (mut took_union, mut took_plain) = (false, false);
        for seed in 0..32u64 {
            let mut rng = RngState::new(seed);
            let p = RngState::new(seed).uniform();
            let out = loss_h_bu(&b, &preds, 3, &w, &mut rng).unwrap();
            assert_eq!(out.used_union, p >= 0.5);
            if out.used_union {
                took_union = true;
                let u = union_box(b.iter().map(|s| &s.bbox)).unwrap();
                assert_eq!(out.targets.iter().filter(|t| t.is_object).count(), 1);
                assert_eq!(out.targets[0].bbox, u);
                assert_eq!(out.targets.len(), 3);
            } else {
                took_plain = true;
                let (plain, _) = loss_h(&b, &preds, 3, &w).unwrap();
                assert_eq!(out.breakdown, plain);
            }
        }
        assert!(took_union && took_plain);

        // a singleton set is its own union
        let single = [b[0]];
        let mut r1 = RngState::new(1);
        let mut r2 = RngState::new(2);
        let a = loss_h_bu(&single, &preds, 3, &w, &mut r1).unwrap();
        let c = loss_h_bu(&single, &preds, 3, &w, &mut r2).unwrap();
        assert!((a.breakdown.total - c.breakdown.total).abs() < 1e-12);

        assert!(matches!(loss_h_bu(&[], &preds, 3, &w, &mut RngState::new(0)), Err(Error::EmptyBoxSet)));
    }

    #[test]
    fn union_loss_is_reproducible_per_seed() {
        let b = [sb(0.25, 0.25, 0.1, 0.1, 0.9), sb(0.7, 0.6, 0.2, 0.2, 0.7)];
        let preds = [pred(0.4, 0.4, 0.3, 0.3, 1.0), pred(0.5, 0.5, 0.2, 0.1, -1.0)];
        let w = LossWeights::default();
        let a = loss_h_bu(&b, &preds, 2, &w, &mut RngState::new(9)).unwrap();
        let c = loss_h_bu(&b, &preds, 2, &w, &mut RngState::new(9)).unwrap();
        assert_eq!(a, c);
    }
}
