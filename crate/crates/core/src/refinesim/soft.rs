//! Moment-based soft box predictor: a differentiable stand-in for a learned
//! heatmap-to-box network.

use crate::error::{Error, Result};
use crate::geometry::{BBox, PredBox};
use crate::heatmap::Heatmap;

/// Added to variances before the square root so single-pixel masses stay
/// differentiable.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Affine map from moment statistics `(mean_x, mean_y, std_x, std_y)` to
/// `(cx, cy, w, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub scale: [f64; 4],
    pub offset: [f64; 4],
}

impl Default for Calibration {
    /// Identity on centers; the width of a uniform distribution on an
    /// interval is `2√3` times its standard deviation.
    fn default() -> Self {
        let s = 2.0 * 3f64.sqrt();
        Self {
            scale: [1.0, 1.0, s, s],
            offset: [0.0; 4],
        }
    }
}

impl Calibration {
    pub fn new(scale: [f64; 4], offset: [f64; 4]) -> Result<Self> {
        if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) || offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidArgument(format!("calibration scales must be > 0: {scale:?}")));
        }
        Ok(Self { scale, offset })
    }

    pub fn as_array(&self) -> [f64; 8] {
        let mut v = [0.0; 8];
        v[..4].copy_from_slice(&self.scale);
        v[4..].copy_from_slice(&self.offset);
        v
    }

    pub fn from_array(v: [f64; 8]) -> Self {
        Self {
            scale: [v[0], v[1], v[2], v[3]],
            offset: [v[4], v[5], v[6], v[7]],
        }
    }

    fn apply(&self, stats: [f64; 4]) -> BBox {
        let b: Vec<f64> = (0..4).map(|i| self.scale[i] * stats[i] + self.offset[i]).collect();
        BBox::new(b[0], b[1], b[2], b[3])
    }
}

/// Mass-weighted statistics of pixel centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub mean: [f64; 2],
    pub var: [f64; 2],
}

impl Moments {
    pub fn of(m: &Heatmap) -> Result<Self> {
        let mass: f64 = m.values.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidData("zero-mass heatmap".into()));
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for y in 0..m.height {
            for x in 0..m.width {
                let v = m.get(x, y);
                sx += v * center(x, m.width);
                sy += v * center(y, m.height);
            }
        }
        let mean = [sx / mass, sy / mass];
        let (mut vx, mut vy) = (0.0, 0.0);
        for y in 0..m.height {
            for x in 0..m.width {
                let v = m.get(x, y);
                vx += v * (center(x, m.width) - mean[0]).powi(2);
                vy += v * (center(y, m.height) - mean[1]).powi(2);
            }
        }
        Ok(Self {
            mass,
            mean,
            var: [vx / mass, vy / mass],
        })
    }

    pub fn std(&self) -> [f64; 2] {
        [(self.var[0] + VARIANCE_FLOOR).sqrt(), (self.var[1] + VARIANCE_FLOOR).sqrt()]
    }

    /// `(mean_x, mean_y, std_x, std_y)`.
    pub fn stats(&self) -> [f64; 4] {
        let s = self.std();
        [self.mean[0], self.mean[1], s[0], s[1]]
    }

    /// Prediction with object logit `ln(mass)` and no-object logit 0, so the
    /// objectness is `mass / (1 + mass)`.
    pub fn predict(&self, calib: &Calibration) -> PredBox {
        PredBox::new(calib.apply(self.stats()), self.mass.ln(), 0.0)
    }
}

fn center(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

pub fn soft_boxes(m: &Heatmap, calib: &Calibration) -> Result<PredBox> {
    Ok(Moments::of(m)?.predict(calib))
}

/// Given `∂L/∂(cx, cy, w, h, l_obj, l_noobj)`, return `∂L/∂M` per pixel and
/// `∂L/∂calibration` (scales then offsets).
pub fn soft_boxes_vjp(m: &Heatmap, calib: &Calibration, g: &[f64; 6]) -> Result<(Vec<f64>, [f64; 8])> {
    let mo = Moments::of(m)?;
    let stats = mo.stats();
    let mut dcal = [0.0; 8];
    for i in 0..4 {
        dcal[i] = g[i] * stats[i];
        dcal[4 + i] = g[i];
    }
    let std = mo.std();
    // upstream gradients on the raw statistics
    let dmean = [g[0] * calib.scale[0], g[1] * calib.scale[1]];
    let dvar = [g[2] * calib.scale[2] / (2.0 * std[0]), g[3] * calib.scale[3] / (2.0 * std[1])];
    let dmass = g[4] / mo.mass;

    let mut dm = vec![0.0; m.values.len()];
    for y in 0..m.height {
        let ey = center(y, m.height) - mo.mean[1];
        for x in 0..m.width {
            let ex = center(x, m.width) - mo.mean[0];
            // d mean/dM = e / mass; d var/dM = (e² - var) / mass
            dm[y * m.width + x] = (dmean[0] * ex
                + dmean[1] * ey
                + dvar[0] * (ex * ex - mo.var[0])
                + dvar[1] * (ey * ey - mo.var[1]))
                / mo.mass
                + dmass;
        }
    }
    Ok((dm, dcal))
}
