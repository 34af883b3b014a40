use std::collections::HashSet;

use super::optimize::{phase1_fit, phase2_refine, top_extracted_box, FitResult, RefineResult, Schedule};
use super::render::{render, Blob, BlobParams};
use super::soft::{soft_boxes, Calibration};
use crate::cli_io::parse_key_values;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, ScoredBox};
use crate::heatmap::{extract_boxes, Heatmap};
use crate::matching::{LossWeights, RngState};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub width: usize,
    pub height: usize,
    /// Blobs the refinement starts from.
    pub blobs: BlobParams,
    /// Blobs whose rendering supplies the teacher boxes.
    pub teacher_blobs: BlobParams,
    pub schedule: Schedule,
    pub reg_weight: f64,
    /// Number of random single-blob maps used to fit the calibration.
    pub phase1_samples: usize,
    pub weights: LossWeights,
}

impl DemoConfig {
    /// Parse a flat `key = value` file. `blob` and `teacher_blob` take five
    /// numbers `mx my sx sy amp` and may repeat; other keys may not.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = DemoConfig {
            width: 64,
            height: 64,
            blobs: BlobParams { blobs: vec![] },
            teacher_blobs: BlobParams { blobs: vec![] },
            schedule: Schedule::default(),
            reg_weight: 1.0,
            phase1_samples: 24,
            weights: LossWeights::default(),
        };
        let mut seen = HashSet::new();
        for e in parse_key_values(text)? {
            let repeatable = matches!(e.key.as_str(), "blob" | "teacher_blob");
            if !repeatable && !seen.insert(e.key.clone()) {
                return Err(e.error("duplicate key"));
            }
            match e.key.as_str() {
                "width" => cfg.width = e.parse()?,
                "height" => cfg.height = e.parse()?,
                "blob" | "teacher_blob" => {
                    let v: Vec<f64> = e.parse_list()?;
                    let v: [f64; 5] = v.try_into().map_err(|_| e.error("expected 5 numbers: mx my sx sy amp"))?;
                    let target = if e.key == "blob" { &mut cfg.blobs } else { &mut cfg.teacher_blobs };
                    target.blobs.push(Blob::from_array(v));
                }
                "phase1_iters" => cfg.schedule.phase1_iters = e.parse()?,
                "phase2_iters" => cfg.schedule.phase2_iters = e.parse()?,
                "phase1_lr" => cfg.schedule.phase1_lr = e.parse()?,
                "phase2_lr" => cfg.schedule.phase2_lr = e.parse()?,
                "seed" => cfg.schedule.seed = e.parse()?,
                "reg_weight" => cfg.reg_weight = e.parse()?,
                "phase1_samples" => cfg.phase1_samples = e.parse()?,
                "lambda_cls" => cfg.weights.cls = e.parse()?,
                "lambda_box" => cfg.weights.bbox = e.parse()?,
                "lambda_giou" => cfg.weights.giou = e.parse()?,
                _ => return Err(e.error("unknown key")),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("width and height must be > 0".into()));
        }
        if self.blobs.blobs.is_empty() || self.teacher_blobs.blobs.is_empty() {
            return Err(Error::InvalidArgument("need at least one blob and one teacher_blob".into()));
        }
        self.blobs.validate()?;
        self.teacher_blobs.validate()?;
        LossWeights::new(self.weights.cls, self.weights.bbox, self.weights.giou)?;
        let s = &self.schedule;
        if !(s.phase1_lr >= 0.0 && s.phase2_lr >= 0.0) {
            return Err(Error::InvalidArgument("learning rates must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub fit: FitResult,
    pub refine: RefineResult,
    pub teacher: Vec<ScoredBox>,
    pub initial_soft_box: BBox,
    pub final_soft_box: BBox,
    pub initial_extracted: Option<BBox>,
    pub final_extracted: Option<BBox>,
    pub initial_iou: f64,
    pub final_iou: f64,
}

impl DemoReport {
    /// Relative decrease of the phase-2 loss from the first to the last entry.
    pub fn loss_reduction(&self) -> f64 {
        let t = &self.refine.trace;
        match (t.first(), t.last()) {
            (Some(a), Some(b)) if *a > 0.0 => (a - b) / a,
            _ => 0.0,
        }
    }
}

/// Random single-blob maps for the calibration fit.
pub fn calibration_dataset(n: usize, width: usize, height: usize, rng: &mut RngState) -> Result<Vec<Heatmap>> {
    (0..n)
        .map(|_| {
            let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.uniform();
            let b = Blob::new(u(0.25, 0.75), u(0.25, 0.75), u(0.04, 0.12), u(0.04, 0.12), u(0.5, 1.0));
            render(&BlobParams::single(b)?, width, height)
        })
        .collect()
}

/// Fit the soft predictor on random blobs, freeze it, then refine the
/// configured blobs toward the teacher boxes.
pub fn run_demo(cfg: &DemoConfig) -> Result<DemoReport> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = RngState::new(cfg.schedule.seed);
    let data = calibration_dataset(cfg.phase1_samples, w, h, &mut rng)?;
    let fit = phase1_fit(&data, Calibration::default(), &cfg.schedule, &cfg.weights)?;

    let teacher = extract_boxes(&render(&cfg.teacher_blobs, w, h)?);
    if teacher.is_empty() {
        return Err(Error::EmptyBoxSet);
    }
    let schedule = Schedule {
        seed: cfg.schedule.seed.wrapping_add(1),
        ..cfg.schedule
    };
    let refine = phase2_refine(&cfg.blobs, &teacher, &fit.calibration, &schedule, cfg.reg_weight, &cfg.weights, w, h)?;

    let before = render(&cfg.blobs, w, h)?;
    let after = render(&refine.params, w, h)?;
    let initial_extracted = top_extracted_box(&before);
    let final_extracted = top_extracted_box(&after);
    let best_iou = |b: Option<BBox>| b.map_or(0.0, |b| teacher.iter().map(|t| iou(&b, &t.bbox)).fold(0.0, f64::max));
    Ok(DemoReport {
        initial_soft_box: soft_boxes(&before, &fit.calibration)?.bbox,
        final_soft_box: soft_boxes(&after, &fit.calibration)?.bbox,
        initial_iou: best_iou(initial_extracted),
        final_iou: best_iou(final_extracted),
        initial_extracted,
        final_extracted,
        fit,
        refine,
        teacher,
    })
}
