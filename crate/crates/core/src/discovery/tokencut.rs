use super::spectral::dominant_index;
use super::{fiedler_vector, DiscoveryResult, FeatureGrid, GraphFlavor, PatchGraph};
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.2;
pub const DEFAULT_EPS: f64 = 1e-5;
/// Below this spacing between the second and third eigenvalues the cut is
/// arbitrary and every patch is selected instead.
pub const DEGENERATE_GAP: f64 = 1e-10;

/// `1` where cosine similarity reaches `tau`, `eps` elsewhere; unit diagonal.
pub fn tokencut_affinity(f: &FeatureGrid, tau: f64, eps: f64) -> Result<PatchGraph> {
    let n = f.len();
    let norms: Vec<f64> = (0..n).map(|p| f.dot(p, p).sqrt()).collect();
    if let Some(p) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroFeature(p));
    }
    let mut weights = vec![0.0; n * n];
    for p in 0..n {
        weights[p * n + p] = 1.0;
        for q in p + 1..n {
            let cos = f.dot(p, q) / (norms[p] * norms[q]);
            let a = if cos >= tau { 1.0 } else { eps };
            weights[p * n + q] = a;
            weights[q * n + p] = a;
        }
    }
    Ok(PatchGraph {
        n,
        weights,
        flavor: GraphFlavor::TokenCutAffinity,
    })
}

/// Split patches at the eigenvector mean and keep the side holding the
/// entry of largest magnitude.
pub fn tokencut_discover(f: &FeatureGrid, tau: f64, eps: f64) -> Result<DiscoveryResult> {
    let graph = tokencut_affinity(f, tau, eps)?;
    let n = f.len();
    let everything = || DiscoveryResult {
        selected: (0..n).collect(),
        seed: None,
        bbox: f.patches_box(&(0..n).collect::<Vec<_>>()),
        eigenvector: None,
    };
    if n < 2 {
        return Ok(everything());
    }
    let fiedler = fiedler_vector(&graph)?;
    if fiedler.gap.is_some_and(|g| g < DEGENERATE_GAP) {
        return Ok(everything());
    }
    let x = &fiedler.vector;
    let mean = x.iter().sum::<f64>() / n as f64;
    let pivot = dominant_index(x);
    let upper = x[pivot] > mean;
    let selected: Vec<usize> = (0..n).filter(|&i| (x[i] > mean) == upper).collect();
    Ok(DiscoveryResult {
        bbox: f.patches_box(&selected),
        selected,
        seed: None,
        eigenvector: Some(fiedler.vector),
    })
}
