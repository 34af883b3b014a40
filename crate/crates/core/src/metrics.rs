//! Pointing-game accuracy, bounding-box accuracy and CorLoc.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::heatmap::{enclosing_prediction_box, extract_boxes, Heatmap};

/// Minimum IoU a prediction must exceed (strictly) to count as correct.
pub const IOU_HIT_THRESHOLD: f64 = 0.5;

/// True when the pixel center of the first maximum lies inside any
/// ground-truth box, edges included.
pub fn pointing_hit(m: &Heatmap, gt: &[BBox]) -> bool {
    let (x, y) = m.argmax();
    let px = (x as f64 + 0.5) / m.width as f64;
    let py = (y as f64 + 0.5) / m.height as f64;
    gt.iter().any(|g| g.contains_point(px, py))
}

/// True when the prediction overlaps some ground-truth box with IoU > 0.5.
pub fn bbox_hit(pred: &BBox, gt: &[BBox]) -> bool {
    gt.iter().any(|g| iou(pred, g) > IOU_HIT_THRESHOLD)
}

/// Same predicate as [`bbox_hit`], under its detection-literature name.
pub fn corloc_hit(pred: &BBox, gt: &[BBox]) -> bool {
    bbox_hit(pred, gt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Pointing,
    BBox,
    CorLoc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Pointing => "pointing",
            Metric::BBox => "bbox",
            Metric::CorLoc => "corloc",
        }
    }
}

/// How a heatmap prediction becomes a single box for the box metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoxExtraction {
    /// Union of the boxes surviving contour-sum scoring and NMS.
    #[default]
    Enclosing,
    /// Highest-scoring box of the mean-in-box teacher pipeline.
    TopTeacher,
}

impl BoxExtraction {
    pub fn apply(self, m: &Heatmap) -> Result<BBox> {
        match self {
            BoxExtraction::Enclosing => enclosing_prediction_box(m),
            BoxExtraction::TopTeacher => extract_boxes(m).first().map(|b| b.bbox).ok_or(Error::EmptyPrediction),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Heatmap(Heatmap),
    Box(BBox),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub id: String,
    pub prediction: Prediction,
    pub ground_truth: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutcome {
    pub id: String,
    pub hit: bool,
    /// Why a sample could not be scored normally, e.g. an empty prediction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub hits: usize,
    pub total: usize,
    pub accuracy: f64,
    pub samples: Vec<SampleOutcome>,
}

pub fn evaluate(samples: &[EvalSample], metric: Metric, extraction: BoxExtraction) -> Result<EvalReport> {
    let first = samples.first().ok_or(Error::NoSamples)?;
    let heatmaps = matches!(first.prediction, Prediction::Heatmap(_));
    let mut outcomes = Vec::with_capacity(samples.len());
    for s in samples {
        if matches!(s.prediction, Prediction::Heatmap(_)) != heatmaps {
            return Err(Error::InvalidData(format!("sample {}: mixed prediction kinds", s.id)));
        }
        if s.ground_truth.is_empty() {
            return Err(Error::InvalidData(format!("sample {}: no ground-truth boxes", s.id)));
        }
        if let Some(g) = s.ground_truth.iter().find(|g| !g.is_valid()) {
            return Err(Error::InvalidData(format!("sample {}: invalid ground-truth box {g:?}", s.id)));
        }
        let (hit, note) = match (&s.prediction, metric) {
            (Prediction::Heatmap(m), Metric::Pointing) => (pointing_hit(m, &s.ground_truth), None),
            (Prediction::Box(_), Metric::Pointing) => {
                return Err(Error::InvalidArgument("pointing needs heatmap predictions".into()));
            }
            (Prediction::Heatmap(m), _) => match extraction.apply(m) {
                Ok(b) => (bbox_hit(&b, &s.ground_truth), None),
                Err(e) => (false, Some(e.to_string())),
            },
            (Prediction::Box(b), _) => (bbox_hit(b, &s.ground_truth), None),
        };
        outcomes.push(SampleOutcome {
            id: s.id.clone(),
            hit,
            note,
        });
    }
    let hits = outcomes.iter().filter(|o| o.hit).count();
    Ok(EvalReport {
        metric,
        hits,
        total: outcomes.len(),
        accuracy: hits as f64 / outcomes.len() as f64,
        samples: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointing_examples() {
        let mut m = Heatmap::zeros(10, 10);
        m.set(3, 4, 1.0);
        assert!(pointing_hit(&m, &[BBox::from_corners(0.2, 0.3, 0.5, 0.6)]));
        assert!(!pointing_hit(&m, &[BBox::from_corners(0.6, 0.6, 0.9, 0.9)]));

        let flat = Heatmap::new(4, 4, vec![0.5; 16]).unwrap();
        assert!(pointing_hit(&flat, &[BBox::from_corners(0.0, 0.0, 0.125, 0.125)]));
        assert!(!pointing_hit(&flat, &[BBox::from_corners(0.25, 0.0, 1.0, 1.0)]));
    }

    #[test]
    fn bbox_examples() {
        let pred = BBox::from_corners(0.0, 0.0, 0.2, 0.2);
        assert!(bbox_hit(&pred, &[BBox::from_corners(0.0, 0.0, 0.2, 0.21)]));
        // exactly representable half overlap
        let half = BBox::from_corners(0.0, 0.0, 0.5, 1.0);
        let full = BBox::from_corners(0.0, 0.0, 1.0, 1.0);
        assert_eq!(iou(&half, &full), 0.5);
        assert!(!bbox_hit(&half, &[full]));
        assert!(!corloc_hit(&half, &[full]));
        assert!(!bbox_hit(&pred, &[BBox::from_corners(0.5, 0.5, 0.9, 0.9)]));
        // any annotation suffices
        assert!(bbox_hit(&pred, &[BBox::from_corners(0.5, 0.5, 0.9, 0.9), pred]));
    }

    fn sample(id: &str, p: Prediction, gt: Vec<BBox>) -> EvalSample {
        EvalSample {
            id: id.into(),
            prediction: p,
            ground_truth: gt,
        }
    }

    #[test]
    fn evaluate_counts_and_errors() {
        let g = BBox::from_corners(0.25, 0.25, 0.75, 0.75);
        let samples = vec![
            sample("a", Prediction::Box(g), vec![g]),
            sample("b", Prediction::Box(BBox::from_corners(0.0, 0.0, 0.1, 0.1)), vec![g]),
            sample("c", Prediction::Box(g), vec![g]),
        ];
        let r = evaluate(&samples, Metric::BBox, BoxExtraction::Enclosing).unwrap();
        assert_eq!((r.hits, r.total), (2, 3));
        assert_eq!(r.accuracy, 2.0 / 3.0);
        assert!(matches!(evaluate(&[], Metric::CorLoc, BoxExtraction::Enclosing), Err(Error::NoSamples)));
        assert!(evaluate(&samples, Metric::Pointing, BoxExtraction::Enclosing).is_err());

        let mut mixed = samples.clone();
        mixed.push(sample("d", Prediction::Heatmap(Heatmap::zeros(2, 2)), vec![g]));
        assert!(matches!(evaluate(&mixed, Metric::BBox, BoxExtraction::Enclosing), Err(Error::InvalidData(_))));
    }

    #[test]
    fn empty_heatmap_is_a_recorded_miss() {
        let g = BBox::from_corners(0.0, 0.0, 1.0, 1.0);
        let samples = vec![sample("z", Prediction::Heatmap(Heatmap::zeros(4, 4)), vec![g])];
        let r = evaluate(&samples, Metric::CorLoc, BoxExtraction::Enclosing).unwrap();
        assert_eq!(r.hits, 0);
        assert_eq!(r.samples[0].note.as_deref(), Some("empty prediction"));
    }

    #[test]
    fn ground_truth_order_does_not_matter() {
        let mut m = Heatmap::zeros(16, 16);
        m.fill_rect(2, 2, 8, 6, 1.0);
        let gt = vec![BBox::from_corners(0.5, 0.5, 1.0, 1.0), BBox::from_corners(0.125, 0.125, 0.5, 0.375)];
        let rev: Vec<BBox> = gt.iter().rev().copied().collect();
        for metric in [Metric::Pointing, Metric::BBox, Metric::CorLoc] {
            let a = evaluate(&[sample("s", Prediction::Heatmap(m.clone()), gt.clone())], metric, BoxExtraction::Enclosing).unwrap();
            let b = evaluate(&[sample("s", Prediction::Heatmap(m.clone()), rev.clone())], metric, BoxExtraction::Enclosing).unwrap();
            assert_eq!(a.hits, 1);
            assert_eq!(a, b);
        }
    }
}
