//! Heatmap to box conversion.
//!
//! Two pipelines share the same stages (binarize at a fraction of the peak,
//! trace outer contours, box and score each contour, suppress overlaps):
//!
//! * [`extract_boxes`] scores each box by the mean heatmap value inside it and
//!   returns every survivor. Its output is the teacher box set.
//! * [`enclosing_prediction_box`] scores by the heatmap mass enclosed by the
//!   contour and returns the single box enclosing all survivors, which is the
//!   box used by the box-accuracy metrics.

mod components;
mod contour;
mod nms;

pub use components::{connected_components, Connectivity, Labels};
pub use contour::{trace_contours, Contour};
pub use nms::{nms, DEFAULT_IOU_THRESHOLD, DEFAULT_SCORE_RATIO};

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{union_box, BBox, ScoredBox};

/// Dense single-channel map with values in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidData(format!("heatmap dims {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", width * height),
                actual: format!("{} values", values.len()),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidData(format!("heatmap value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// First maximum in row-major order, as `(x, y)`.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    /// Fill the half-open pixel rectangle `[x0, x1) × [y0, y1)` with `v`.
    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, v: f64) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set(x, y, v);
            }
        }
    }

    /// Normalized box covering the inclusive pixel bounds.
    pub fn pixel_box(&self, min_x: usize, min_y: usize, max_x: usize, max_y: usize) -> BBox {
        pixel_bounds_to_box(self.width, self.height, (min_x, min_y, max_x, max_y))
    }
}

/// Inclusive pixel bounds to a normalized box spanning `[min, max + 1)`.
pub fn pixel_bounds_to_box(width: usize, height: usize, b: (usize, usize, usize, usize)) -> BBox {
    let (w, h) = (width as f64, height as f64);
    BBox::from_corners(
        b.0 as f64 / w,
        b.1 as f64 / h,
        (b.2 + 1) as f64 / w,
        (b.3 + 1) as f64 / h,
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: format!("{} bits", width * height),
                actual: format!("{} bits", bits.len()),
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Keep pixels whose value is at least `ratio` times the map maximum.
/// An all-zero map gives an empty mask.
pub fn binarize(m: &Heatmap, ratio: f64) -> Result<BinaryMask> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("binarize ratio {ratio} not in (0, 1]")));
    }
    let max = m.max();
    if max <= 0.0 {
        return Ok(threshold(m, f64::INFINITY));
    }
    Ok(threshold(m, ratio * max))
}

/// Keep pixels whose value is at least `level`.
pub fn threshold(m: &Heatmap, level: f64) -> BinaryMask {
    BinaryMask {
        width: m.width,
        height: m.height,
        bits: m.values.iter().map(|&v| v >= level).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    /// Mean of the heatmap over the box's pixels.
    MeanInBox,
    /// Sum of the heatmap over the pixels enclosed by the contour.
    SumInContour,
}

/// Pixels on or enclosed by the contour, as a mask over the contour's
/// bounding rectangle `(x0, y0, w, h)`.
///
/// The contour is an 8-connected closed curve, so a 4-connected flood from
/// outside cannot cross it; whatever the flood misses is inside.
fn enclosed_region(contour: &Contour) -> ((usize, usize, usize, usize), Vec<bool>) {
    let (x0, y0, x1, y1) = contour.bounds();
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    // one pixel of padding on every side so the flood surrounds the curve
    let (pw, ph) = (w + 2, h + 2);
    let mut wall = vec![false; pw * ph];
    for &(x, y) in &contour.points {
        wall[(y - y0 + 1) * pw + (x - x0 + 1)] = true;
    }
    let mut outside = vec![false; pw * ph];
    let mut queue = VecDeque::from([0usize]);
    outside[0] = true;
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % pw, i / pw);
        let mut visit = |j: usize| {
            if !wall[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < pw {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - pw);
        }
        if y + 1 < ph {
            visit(i + pw);
        }
    }
    let mut inside = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            inside[y * w + x] = !outside[(y + 1) * pw + (x + 1)];
        }
    }
    ((x0, y0, w, h), inside)
}

/// One box per contour: the tight box of its points, scored by `mode`.
pub fn boxes_from_contours(contours: &[Contour], m: &Heatmap, mode: ScoreMode) -> Vec<ScoredBox> {
    contours
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| {
            let bounds = c.bounds();
            let score = match mode {
                ScoreMode::MeanInBox => {
                    let (x0, y0, x1, y1) = bounds;
                    let mut sum = 0.0;
                    for y in y0..=y1 {
                        for x in x0..=x1 {
                            sum += m.get(x, y);
                        }
                    }
                    sum / ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64
                }
                ScoreMode::SumInContour => {
                    let ((x0, y0, w, h), inside) = enclosed_region(c);
                    let mut sum = 0.0;
                    for y in 0..h {
                        for x in 0..w {
                            if inside[y * w + x] {
                                sum += m.get(x0 + x, y0 + y);
                            }
                        }
                    }
                    sum
                }
            };
            ScoredBox::new(m.pixel_box(bounds.0, bounds.1, bounds.2, bounds.3), score)
        })
        .collect()
}

fn scored_survivors(m: &Heatmap, mode: ScoreMode) -> Vec<ScoredBox> {
    let mask = binarize(m, 0.5).expect("0.5 is a valid ratio");
    let contours = trace_contours(&mask);
    let boxes = boxes_from_contours(&contours, m, mode);
    nms(&boxes, DEFAULT_IOU_THRESHOLD, DEFAULT_SCORE_RATIO)
}

/// Teacher boxes: half-max binarization, contours, mean-in-box scores, NMS.
pub fn extract_boxes(m: &Heatmap) -> Vec<ScoredBox> {
    scored_survivors(m, ScoreMode::MeanInBox)
}

/// Metric-time box: like [`extract_boxes`] but scored by enclosed mass, then
/// the union of all survivors.
pub fn enclosing_prediction_box(m: &Heatmap) -> Result<BBox> {
    let survivors = scored_survivors(m, ScoreMode::SumInContour);
    union_box(survivors.iter().map(|s| &s.bbox)).map_err(|_| Error::EmptyPrediction)
}
