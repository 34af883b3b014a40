use crate::error::{Error, Result};
use crate::heatmap::Heatmap;

/// Axis-aligned Gaussian bump in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub mx: f64,
    pub my: f64,
    pub sx: f64,
    pub sy: f64,
    pub amp: f64,
}

impl Blob {
    pub fn new(mx: f64, my: f64, sx: f64, sy: f64, amp: f64) -> Self {
        Self { mx, my, sx, sy, amp }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.mx, self.my, self.sx, self.sy, self.amp]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite blob {self:?}")));
        }
        if self.sx <= 0.0 || self.sy <= 0.0 {
            return Err(Error::InvalidArgument(format!("blob sigma must be > 0, got ({}, {})", self.sx, self.sy)));
        }
        if !(0.0..=1.0).contains(&self.amp) {
            return Err(Error::InvalidArgument(format!("blob amplitude {} outside [0, 1]", self.amp)));
        }
        Ok(())
    }

    /// Unnormalized Gaussian factor at `(u, v)`.
    fn shape(&self, u: f64, v: f64) -> f64 {
        let dx = (u - self.mx) / self.sx;
        let dy = (v - self.my) / self.sy;
        (-0.5 * (dx * dx + dy * dy)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobParams {
    pub blobs: Vec<Blob>,
}

impl BlobParams {
    pub fn new(blobs: Vec<Blob>) -> Result<Self> {
        let p = Self { blobs };
        p.validate()?;
        Ok(p)
    }

    pub fn single(blob: Blob) -> Result<Self> {
        Self::new(vec![blob])
    }

    pub fn validate(&self) -> Result<()> {
        self.blobs.iter().try_for_each(Blob::validate)
    }
}

fn pixel_center(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

fn unclamped(params: &BlobParams, width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for b in &params.blobs {
        for y in 0..height {
            let v = pixel_center(y, height);
            for x in 0..width {
                out[y * width + x] += b.amp * b.shape(pixel_center(x, width), v);
            }
        }
    }
    out
}

/// Sum of the blobs sampled at pixel centers, clamped to `[0, 1]`.
pub fn render(params: &BlobParams, width: usize, height: usize) -> Result<Heatmap> {
    params.validate()?;
    let raw = unclamped(params, width, height);
    Heatmap::new(width, height, raw.into_iter().map(|v| v.min(1.0)).collect())
}

/// Pull a gradient on the rendered map back to `(mx, my, sx, sy, amp)` per
/// blob. Pixels saturated by the clamp pass no gradient.
pub fn render_vjp(params: &BlobParams, width: usize, height: usize, grad_map: &[f64]) -> Result<Vec<[f64; 5]>> {
    params.validate()?;
    if grad_map.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: format!("{} values", width * height),
            actual: format!("{} values", grad_map.len()),
        });
    }
    let raw = unclamped(params, width, height);
    let mut out = vec![[0.0; 5]; params.blobs.len()];
    for (b, g) in params.blobs.iter().zip(&mut out) {
        for y in 0..height {
            let v = pixel_center(y, height);
            for x in 0..width {
                let i = y * width + x;
                if raw[i] > 1.0 || grad_map[i] == 0.0 {
                    continue;
                }
                let u = pixel_center(x, width);
                let s = b.shape(u, v);
                let val = b.amp * s * grad_map[i];
                let (dx, dy) = (u - b.mx, v - b.my);
                g[0] += val * dx / (b.sx * b.sx);
                g[1] += val * dy / (b.sy * b.sy);
                g[2] += val * dx * dx / b.sx.powi(3);
                g[3] += val * dy * dy / b.sy.powi(3);
                g[4] += s * grad_map[i];
            }
        }
    }
    Ok(out)
}
