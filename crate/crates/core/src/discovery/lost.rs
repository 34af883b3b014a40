use std::collections::VecDeque;

use super::{DiscoveryResult, FeatureGrid, GraphFlavor, PatchGraph};

/// Size of the low-degree candidate list; clipped to the patch count.
pub const DEFAULT_LOST_A: usize = 100;

/// `a_pq = 1` when `f_p · f_q >= 0`, self-loops included.
pub fn lost_adjacency(f: &FeatureGrid) -> PatchGraph {
    let n = f.len();
    let mut weights = vec![0.0; n * n];
    for p in 0..n {
        for q in p..n {
            let a = if f.dot(p, q) >= 0.0 { 1.0 } else { 0.0 };
            weights[p * n + q] = a;
            weights[q * n + p] = a;
        }
    }
    PatchGraph {
        n,
        weights,
        flavor: GraphFlavor::LostBinary,
    }
}

/// Patch of minimal degree, lowest index on ties.
pub fn lost_seed(graph: &PatchGraph) -> usize {
    debug_assert_eq!(graph.flavor, GraphFlavor::LostBinary);
    let degrees = graph.degrees();
    let mut best = 0;
    for (p, &d) in degrees.iter().enumerate() {
        if d < degrees[best] {
            best = p;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LostExpansion {
    pub seed: usize,
    /// The `a` lowest-degree patches, by degree then index.
    pub low_degree: Vec<usize>,
    /// Low-degree patches positively correlated with the seed.
    pub seed_set: Vec<usize>,
    /// Patches whose summed correlation with `seed_set` is non-negative.
    pub expanded: Vec<usize>,
    /// 4-connected component of `expanded` containing the seed, ascending.
    pub component: Vec<usize>,
}

pub fn lost_expand(f: &FeatureGrid, graph: &PatchGraph, a: usize) -> LostExpansion {
    let n = f.len();
    let a = a.clamp(1, n);
    let seed = lost_seed(graph);
    let degrees = graph.degrees();

    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by(|&p, &q| degrees[p].total_cmp(&degrees[q]).then(p.cmp(&q)));
    by_degree.truncate(a);

    let seed_set: Vec<usize> = by_degree.iter().copied().filter(|&q| f.dot(q, seed) >= 0.0).collect();
    let expanded: Vec<usize> = (0..n)
        .filter(|&q| seed_set.iter().map(|&p| f.dot(q, p)).sum::<f64>() >= 0.0)
        .collect();

    let mut member = vec![false; n];
    for &q in &expanded {
        member[q] = true;
    }
    // the seed correlates with itself, so it is always a member
    member[seed] = true;
    let mut in_component = vec![false; n];
    in_component[seed] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some(p) = queue.pop_front() {
        for q in f.grid_neighbors(p) {
            if member[q] && !in_component[q] {
                in_component[q] = true;
                queue.push_back(q);
            }
        }
    }
    let component = (0..n).filter(|&p| in_component[p]).collect();

    LostExpansion {
        seed,
        low_degree: by_degree,
        seed_set,
        expanded,
        component,
    }
}

pub fn lost_discover(f: &FeatureGrid, a: usize) -> DiscoveryResult {
    let graph = lost_adjacency(f);
    let e = lost_expand(f, &graph, a);
    DiscoveryResult {
        bbox: f.patches_box(&e.component),
        selected: e.component,
        seed: Some(e.seed),
        eigenvector: None,
    }
}
