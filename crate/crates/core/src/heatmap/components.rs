//! Two-pass connected-component labeling over a binary mask.

use petgraph::unionfind::UnionFind;

use super::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Row-major label map. Background is 0, components are numbered from 1 in
/// the raster order of their first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Labels {
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per component, indexed by `label - 1`.
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.count];
        for &l in &self.labels {
            if l > 0 {
                areas[l as usize - 1] += 1;
            }
        }
        areas
    }

    /// Pixel bounds `(min_x, min_y, max_x, max_y)` per component, inclusive.
    pub fn bounds(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut b = vec![(usize::MAX, usize::MAX, 0, 0); self.count];
        for y in 0..self.height {
            for x in 0..self.width {
                let l = self.get(x, y);
                if l > 0 {
                    let e = &mut b[l as usize - 1];
                    e.0 = e.0.min(x);
                    e.1 = e.1.min(y);
                    e.2 = e.2.max(x);
                    e.3 = e.3.max(y);
                }
            }
        }
        b
    }
}

pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Labels {
    let (w, h) = (mask.width, mask.height);
    let mut provisional = vec![0usize; w * h];
    // index 0 is reserved for background
    let mut uf = UnionFind::<usize>::new(w * h + 1);
    let mut next = 1usize;

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut neighbors = [0usize; 4];
            let mut n = 0;
            let mut push = |l: usize| {
                if l > 0 {
                    neighbors[n] = l;
                    n += 1;
                }
            };
            if x > 0 {
                push(provisional[y * w + x - 1]);
            }
            if y > 0 {
                push(provisional[(y - 1) * w + x]);
                if connectivity == Connectivity::Eight {
                    if x > 0 {
                        push(provisional[(y - 1) * w + x - 1]);
                    }
                    if x + 1 < w {
                        push(provisional[(y - 1) * w + x + 1]);
                    }
                }
            }
            let label = if n == 0 {
                next += 1;
                next - 1
            } else {
                let first = neighbors[0];
                for &other in &neighbors[1..n] {
                    uf.union(first, other);
                }
                first
            };
            provisional[y * w + x] = label;
        }
    }

    // second pass: resolve roots, renumber by first encounter
    let mut final_of_root = vec![0u32; next];
    let mut count = 0usize;
    let labels = provisional
        .iter()
        .map(|&l| {
            if l == 0 {
                return 0;
            }
            let root = uf.find(l);
            if final_of_root[root] == 0 {
                count += 1;
                final_of_root[root] = count as u32;
            }
            final_of_root[root]
        })
        .collect();

    Labels {
        width: w,
        height: h,
        labels,
        count,
    }
}
