//! Single-object discovery from patch features.
//!
//! * LOST: sign-of-dot-product patch graph, lowest-degree seed, seed
//!   expansion, 4-connected component of the seed.
//! * TokenCut: thresholded cosine affinity, normalized-cut bipartition by the
//!   second generalized eigenvector.
//! * MOVE-style: largest connected component of a segmentation map
//!   thresholded at 0.5.

mod lost;
mod segmentation;
mod spectral;
mod tokencut;

pub use lost::{lost_adjacency, lost_discover, lost_expand, lost_seed, LostExpansion, DEFAULT_LOST_A};
pub use segmentation::move_box;
pub use spectral::{fiedler_vector, Fiedler, RESIDUAL_TOLERANCE};
pub use tokencut::{tokencut_affinity, tokencut_discover, DEFAULT_EPS, DEFAULT_TAU, DEGENERATE_GAP};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Per-patch feature vectors on a `rows × cols` grid, row-major patch order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub features: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(rows: usize, cols: usize, dim: usize, features: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::InvalidData(format!("feature grid dims {rows}x{cols}x{dim}")));
        }
        if features.len() != rows * cols * dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", rows * cols * dim),
                actual: format!("{} values", features.len()),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        Ok(Self { rows, cols, dim, features })
    }

    /// Build from one vector per patch.
    pub fn from_patches(rows: usize, cols: usize, patches: &[Vec<f64>]) -> Result<Self> {
        let dim = patches.first().map_or(0, Vec::len);
        if patches.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidData("ragged patch features".into()));
        }
        Self::new(rows, cols, dim, patches.concat())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn patch(&self, p: usize) -> &[f64] {
        &self.features[p * self.dim..(p + 1) * self.dim]
    }

    pub fn dot(&self, p: usize, q: usize) -> f64 {
        self.patch(p).iter().zip(self.patch(q)).map(|(a, b)| a * b).sum()
    }

    /// 4-connected grid neighbors of patch `p`.
    pub fn grid_neighbors(&self, p: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = (p / self.cols, p % self.cols);
        let up = (r > 0).then(|| p - self.cols);
        let down = (r + 1 < self.rows).then(|| p + self.cols);
        let left = (c > 0).then(|| p - 1);
        let right = (c + 1 < self.cols).then(|| p + 1);
        [up, left, right, down].into_iter().flatten()
    }

    /// Tight normalized box around a set of patch cells.
    pub fn patches_box(&self, patches: &[usize]) -> BBox {
        let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
        for &p in patches {
            let (r, c) = (p / self.cols, p % self.cols);
            r0 = r0.min(r);
            c0 = c0.min(c);
            r1 = r1.max(r);
            c1 = c1.max(c);
        }
        crate::heatmap::pixel_bounds_to_box(self.cols, self.rows, (c0, r0, c1, r1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFlavor {
    LostBinary,
    TokenCutAffinity,
}

/// Dense symmetric patch graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGraph {
    pub n: usize,
    pub weights: Vec<f64>,
    pub flavor: GraphFlavor,
}

impl PatchGraph {
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.weights[p * self.n + q]
    }

    pub fn degree(&self, p: usize) -> f64 {
        self.weights[p * self.n..(p + 1) * self.n].iter().sum()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|p| self.degree(p)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|p| (p + 1..self.n).all(|q| self.get(p, q).to_bits() == self.get(q, p).to_bits()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryResult {
    /// Selected patch indices, ascending.
    pub selected: Vec<usize>,
    /// LOST seed patch.
    pub seed: Option<usize>,
    pub bbox: BBox,
    /// TokenCut eigenvector (absent for the degenerate fallback).
    pub eigenvector: Option<Vec<f64>>,
}
