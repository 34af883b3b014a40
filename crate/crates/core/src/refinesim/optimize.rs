use super::render::{render, render_vjp, Blob, BlobParams};
use super::soft::{soft_boxes, soft_boxes_vjp, Calibration, Moments};
use crate::error::{Error, Result};
use crate::geometry::{BBox, ScoredBox};
use crate::heatmap::{extract_boxes, Heatmap};
use crate::matching::{grad_for_assignment, grad_loss_h, loss_h, loss_h_bu, LossWeights, RngState};

/// Smallest sigma and amplitude kept after a descent step.
const MIN_SIGMA: f64 = 1e-3;
const MIN_AMPLITUDE: f64 = 1e-3;
const MIN_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub phase1_iters: usize,
    pub phase2_iters: usize,
    pub phase1_lr: f64,
    pub phase2_lr: f64,
    pub seed: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            phase1_iters: 300,
            phase2_iters: 1000,
            phase1_lr: 5e-3,
            phase2_lr: 1e-4,
            seed: 0,
        }
    }
}

/// Mean squared difference between two maps of equal size.
pub fn reg_loss_f(m: &Heatmap, m0: &Heatmap) -> Result<f64> {
    check_same_dims(m, m0)?;
    let n = m.values.len() as f64;
    Ok(m.values.iter().zip(&m0.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

fn check_same_dims(m: &Heatmap, m0: &Heatmap) -> Result<()> {
    if (m.width, m.height) != (m0.width, m0.height) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", m0.width, m0.height),
            actual: format!("{}x{}", m.width, m.height),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Lowest-loss calibration visited.
    pub calibration: Calibration,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Mean loss of each visited calibration, starting with the initial one.
    pub trace: Vec<f64>,
}

/// Fit the calibration of the soft predictor to the teacher boxes of each
/// map by gradient descent on the mean single-prediction set loss.
pub fn phase1_fit(dataset: &[Heatmap], calib: Calibration, schedule: &Schedule, w: &LossWeights) -> Result<FitResult> {
    if dataset.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut samples = Vec::with_capacity(dataset.len());
    for (i, m) in dataset.iter().enumerate() {
        let teacher = extract_boxes(m);
        if teacher.is_empty() {
            return Err(Error::InvalidData(format!("map {i} yields no teacher box")));
        }
        samples.push((Moments::of(m)?, teacher));
    }
    let n = samples.len() as f64;
    let eval = |c: &Calibration| -> Result<(f64, [f64; 8])> {
        let mut loss = 0.0;
        let mut grad = [0.0; 8];
        for (mo, teacher) in &samples {
            let pred = [mo.predict(c)];
            loss += loss_h(teacher, &pred, 1, w)?.0.total;
            let g = grad_loss_h(teacher, &pred, 1, w)?[0];
            let stats = mo.stats();
            for i in 0..4 {
                grad[i] += g[i] * stats[i];
                grad[4 + i] += g[i];
            }
        }
        for v in &mut grad {
            *v /= n;
        }
        Ok((loss / n, grad))
    };

    let mut current = calib;
    let (mut loss, mut grad) = eval(&current)?;
    let initial_loss = loss;
    let mut best = (loss, current);
    let mut trace = vec![loss];
    for iteration in 0..schedule.phase1_iters {
        let mut v = current.as_array();
        for (p, g) in v.iter_mut().zip(&grad) {
            *p -= schedule.phase1_lr * g;
        }
        for s in &mut v[..4] {
            *s = s.max(MIN_SCALE);
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { iteration });
        }
        current = Calibration::from_array(v);
        // the dataset passed the first evaluation, so later failures are numerical
        (loss, grad) = eval(&current).map_err(|_| Error::Divergence { iteration })?;
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        trace.push(loss);
        if loss < best.0 {
            best = (loss, current);
        }
    }
    Ok(FitResult {
        calibration: best.1,
        initial_loss,
        final_loss: best.0,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineResult {
    pub params: BlobParams,
    /// Total loss before each step, then once more after the last step.
    pub trace: Vec<f64>,
    /// Soft-box centers along the way, aligned with `trace`.
    pub centers: Vec<(f64, f64)>,
}

/// Refine blob parameters so the frozen soft predictor's box approaches the
/// teacher, regularized toward the initial rendering.
#[allow(clippy::too_many_arguments)]
pub fn phase2_refine(
    params: &BlobParams,
    teacher: &[ScoredBox],
    calib: &Calibration,
    schedule: &Schedule,
    reg_weight: f64,
    w: &LossWeights,
    width: usize,
    height: usize,
) -> Result<RefineResult> {
    if !(reg_weight >= 0.0 && reg_weight.is_finite()) {
        return Err(Error::InvalidArgument(format!("reg_weight {reg_weight} must be >= 0")));
    }
    if teacher.is_empty() {
        return Err(Error::EmptyBoxSet);
    }
    let m0 = render(params, width, height)?;
    let npix = m0.values.len() as f64;
    let mut rng = RngState::new(schedule.seed);
    let mut current = params.clone();
    let mut trace = Vec::with_capacity(schedule.phase2_iters + 1);
    let mut centers = Vec::with_capacity(schedule.phase2_iters + 1);

    for iteration in 0..=schedule.phase2_iters {
        let evaluate = |rng: &mut RngState| -> Result<_> {
            let m = render(&current, width, height)?;
            let pred = soft_boxes(&m, calib)?;
            let ul = loss_h_bu(teacher, &[pred], 1, w, rng)?;
            let total = ul.breakdown.total + reg_weight * reg_loss_f(&m, &m0)?;
            Ok((m, pred, ul, total))
        };
        let (m, pred, ul, total) = match evaluate(&mut rng) {
            // a blob pushed out of frame renders to nothing
            Err(_) if iteration > 0 => return Err(Error::Divergence { iteration: iteration - 1 }),
            r => r?,
        };
        if !total.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        trace.push(total);
        centers.push((pred.bbox.cx, pred.bbox.cy));
        if iteration == schedule.phase2_iters {
            break;
        }

        let g = grad_for_assignment(&ul.targets, &[pred], &ul.matching.assignment, w)[0];
        let (mut dm, _) = soft_boxes_vjp(&m, calib, &g)?;
        for ((d, a), b) in dm.iter_mut().zip(&m.values).zip(&m0.values) {
            *d += reg_weight * 2.0 * (a - b) / npix;
        }
        let dp = render_vjp(&current, width, height, &dm)?;
        let blobs = current
            .blobs
            .iter()
            .zip(&dp)
            .map(|(b, g)| {
                let mut v = b.as_array();
                for (p, d) in v.iter_mut().zip(g) {
                    *p -= schedule.phase2_lr * d;
                }
                v[2] = v[2].max(MIN_SIGMA);
                v[3] = v[3].max(MIN_SIGMA);
                v[4] = v[4].clamp(MIN_AMPLITUDE, 1.0);
                Blob::from_array(v)
            })
            .collect();
        current = BlobParams { blobs };
        if let Err(e) = current.validate() {
            return match e {
                Error::InvalidArgument(_) => Err(Error::Divergence { iteration }),
                e => Err(e),
            };
        }
    }
    Ok(RefineResult {
        params: current,
        trace,
        centers,
    })
}

/// Highest-scoring teacher-pipeline box of a map, if any.
pub fn top_extracted_box(m: &Heatmap) -> Option<BBox> {
    extract_boxes(m).first().map(|b| b.bbox)
}
