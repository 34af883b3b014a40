//! Second generalized eigenvector of `(D - W) x = λ D x`.
//!
//! Solved through the symmetric normalized Laplacian
//! `L = D^{-1/2} (D - W) D^{-1/2}`, whose eigenvectors `y` map back as
//! `x = D^{-1/2} y`.

use nalgebra::DMatrix;

use super::PatchGraph;
use crate::error::{Error, Result};

/// Accepted relative residual `‖(D - W)x - λDx‖ / ‖Dx‖`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Fiedler {
    /// Second smallest generalized eigenvalue.
    pub value: f64,
    /// D-normalized (`xᵀDx = 1`), largest-magnitude entry positive.
    pub vector: Vec<f64>,
    /// Third minus second eigenvalue; `None` for two nodes.
    pub gap: Option<f64>,
    /// Achieved relative residual.
    pub residual: f64,
}

pub fn fiedler_vector(graph: &PatchGraph) -> Result<Fiedler> {
    let n = graph.n;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {n}")));
    }
    let degrees = graph.degrees();
    if let Some(p) = degrees.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidData(format!("node {p} has degree {}", degrees[p])));
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();

    let laplacian = DMatrix::from_fn(n, n, |i, j| {
        let off = graph.get(i, j) * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 - off
        } else {
            -off
        }
    });
    // restore exact symmetry lost to rounding order
    let laplacian = (&laplacian + laplacian.transpose()) * 0.5;

    let eig = laplacian
        .try_symmetric_eigen(f64::EPSILON, 100 * n)
        .ok_or(Error::EigenNoConvergence { residual: f64::INFINITY })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let value = eig.eigenvalues[order[1]];
    let gap = (n >= 3).then(|| eig.eigenvalues[order[2]] - value);

    let y = eig.eigenvectors.column(order[1]);
    let mut x: Vec<f64> = (0..n).map(|i| y[i] * inv_sqrt[i]).collect();
    let d_norm = x.iter().zip(&degrees).map(|(v, d)| v * v * d).sum::<f64>().sqrt();
    let pivot = dominant_index(&x);
    let sign = if x[pivot] < 0.0 { -1.0 } else { 1.0 };
    for v in &mut x {
        *v *= sign / d_norm;
    }

    let residual = generalized_residual(graph, &degrees, &x, value);
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(Error::EigenNoConvergence { residual });
    }
    Ok(Fiedler {
        value,
        vector: x,
        gap,
        residual,
    })
}

/// First index whose magnitude is within a relative 1e-9 of the largest, so
/// that rounding noise between mirror-symmetric entries cannot decide.
pub(crate) fn dominant_index(x: &[f64]) -> usize {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter().position(|v| v.abs() >= max * (1.0 - 1e-9)).unwrap_or(0)
}

fn generalized_residual(graph: &PatchGraph, degrees: &[f64], x: &[f64], value: f64) -> f64 {
    let n = graph.n;
    let mut r2 = 0.0;
    let mut dx2 = 0.0;
    for i in 0..n {
        let wx: f64 = (0..n).map(|j| graph.get(i, j) * x[j]).sum();
        let r = degrees[i] * x[i] - wx - value * degrees[i] * x[i];
        r2 += r * r;
        dx2 += (degrees[i] * x[i]).powi(2);
    }
    (r2 / dx2).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::GraphFlavor;

    fn graph(n: usize, w: Vec<f64>) -> PatchGraph {
        PatchGraph {
            n,
            weights: w,
            flavor: GraphFlavor::TokenCutAffinity,
        }
    }

    #[test]
    fn two_nodes_closed_form() {
        let (w11, a, w22) = (1.0, 0.3, 0.6);
        let f = fiedler_vector(&graph(2, vec![w11, a, a, w22])).unwrap();
        let (d1, d2) = (w11 + a, a + w22);
        assert!((f.value - a * (d1 + d2) / (d1 * d2)).abs() < 1e-14);
        let c = 1.0 / (d1 * d2 * (d1 + d2)).sqrt();
        // the node with the smaller degree carries the larger magnitude
        assert!((f.vector[0] + d2 * c).abs() < 1e-14);
        assert!((f.vector[1] - d1 * c).abs() < 1e-14);
        assert_eq!(f.gap, None);
    }

    #[test]
    fn connected_graph_properties() {
        let e = 1e-5;
        let w = vec![
            1.0, 1.0, e, e, //
            1.0, 1.0, e, e, //
            e, e, 1.0, 1.0, //
            e, e, 1.0, 1.0,
        ];
        let g = graph(4, w);
        let f = fiedler_vector(&g).unwrap();
        assert!(f.value > 0.0);
        let d = g.degrees();
        let dot: f64 = f.vector.iter().zip(&d).map(|(x, d)| x * d).sum();
        assert!(dot.abs() < 1e-8);
        assert!(f.residual <= RESIDUAL_TOLERANCE);
        assert_eq!(f.vector[0].signum(), f.vector[1].signum());
        assert_eq!(f.vector[2].signum(), f.vector[3].signum());
        assert_ne!(f.vector[0].signum(), f.vector[2].signum());
    }

    #[test]
    fn rejects_isolated_and_tiny_graphs() {
        assert!(fiedler_vector(&graph(1, vec![1.0])).is_err());
        assert!(fiedler_vector(&graph(2, vec![0.0, 0.0, 0.0, 1.0])).is_err());
    }
}
