//! Independent reference implementations used as test oracles. None of this
//! calls into the library's numerical code.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::VecDeque;
use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Small deterministic generator, independent of the library's RNG.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let x = self.0;
        (x ^ (x >> 29)).wrapping_mul(0xbf58476d1ce4e5b9) ^ (x >> 32)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            v.swap(i, self.below(i + 1));
        }
    }
}

/// Minimum assignment cost over all `n!` permutations.
pub fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for c in 0..cost.len() {
            if !used[c] {
                used[c] = true;
                go(cost, row + 1, used, acc + cost[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

pub type Rect = [f64; 4];

pub fn corners(b: Rect) -> Rect {
    [b[0] - b[2] / 2.0, b[1] - b[3] / 2.0, b[0] + b[2] / 2.0, b[1] + b[3] / 2.0]
}

pub fn oracle_giou(a: Rect, b: Rect) -> f64 {
    let (a, b) = (corners(a), corners(b));
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    let enclose = (a[2].max(b[2]) - a[0].min(b[0])) * (a[3].max(b[3]) - a[1].min(b[1]));
    inter / union - (enclose - union) / enclose
}

/// Weighted set loss for a fixed assignment. `targets[j] = None` is a
/// no-object slot; each prediction is `(cx, cy, w, h, l_obj, l_noobj)`.
pub fn oracle_loss(targets: &[Option<Rect>], preds: &[[f64; 6]], assignment: &[usize], w: [f64; 3]) -> f64 {
    let k = preds.len() as f64;
    let mut total = 0.0;
    for (p, &j) in preds.iter().zip(assignment) {
        let prob = (1.0 / (1.0 + (p[5] - p[4]).exp())).clamp(1e-7, 1.0 - 1e-7);
        let b = [p[0], p[1], p[2], p[3]];
        total += match targets[j] {
            Some(t) => {
                let l1: f64 = (0..4).map(|i| (b[i] - t[i]).abs()).sum();
                w[0] * -prob.ln() + w[1] * l1 + w[2] * (1.0 - oracle_giou(b, t))
            }
            None => w[0] * -(1.0 - prob).ln(),
        };
    }
    total / k
}

/// Which side of every non-smooth point a prediction sits on: signs of the
/// coordinate differences, of all corner comparisons, and the clamp state.
pub fn kink_signature(targets: &[Option<Rect>], preds: &[[f64; 6]], assignment: &[usize]) -> Vec<i8> {
    let sign = |x: f64| if x > 0.0 { 1 } else if x < 0.0 { -1 } else { 0 };
    let mut s = Vec::new();
    for (p, &j) in preds.iter().zip(assignment) {
        let prob = 1.0 / (1.0 + (p[5] - p[4]).exp());
        s.push(if prob < 1e-7 { -1 } else if prob > 1.0 - 1e-7 { 1 } else { 0 });
        if let Some(t) = targets[j] {
            let b = [p[0], p[1], p[2], p[3]];
            for i in 0..4 {
                s.push(sign(b[i] - t[i]));
            }
            let (a, c) = (corners(b), corners(t));
            for (lo, hi) in [(0, 2), (1, 3)] {
                for (x, y) in [(a[lo], c[lo]), (a[hi], c[hi]), (a[hi], c[lo]), (a[lo], c[hi])] {
                    s.push(sign(x - y));
                }
            }
        }
    }
    s
}

/// LOST reference: adjacency, seed, `D_a`, `S`, `S⁺` and the 4-connected
/// component of `S⁺` holding the seed, all by direct evaluation.
pub struct LostOracle {
    pub degrees: Vec<usize>,
    pub seed: usize,
    pub seed_set: Vec<usize>,
    pub expanded: Vec<usize>,
    pub component: Vec<usize>,
}

pub fn lost_oracle(rows: usize, cols: usize, feats: &[Vec<f64>], a: usize) -> LostOracle {
    let n = feats.len();
    let dot = |p: usize, q: usize| -> f64 { feats[p].iter().zip(&feats[q]).map(|(x, y)| x * y).sum() };
    let degrees: Vec<usize> = (0..n).map(|p| (0..n).filter(|&q| dot(p, q) >= 0.0).count()).collect();
    let seed = (0..n).min_by_key(|&p| (degrees[p], p)).unwrap();
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&p| (degrees[p], p));
    by_degree.truncate(a.min(n));
    let seed_set: Vec<usize> = by_degree.into_iter().filter(|&q| dot(q, seed) >= 0.0).collect();
    let expanded: Vec<usize> = (0..n).filter(|&q| seed_set.iter().map(|&p| dot(q, p)).sum::<f64>() >= 0.0).collect();
    let mut seen = vec![false; n];
    seen[seed] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some(p) = queue.pop_front() {
        let (r, c) = ((p / cols) as isize, (p % cols) as isize);
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                continue;
            }
            let q = nr as usize * cols + nc as usize;
            if !seen[q] && expanded.contains(&q) {
                seen[q] = true;
                queue.push_back(q);
            }
        }
    }
    let component = (0..n).filter(|&p| seen[p]).collect();
    LostOracle {
        degrees,
        seed,
        seed_set,
        expanded,
        component,
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues ascending with their eigenvectors as columns.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&i| v[r][i]).collect()).collect();
    (values, vectors)
}

/// Second generalized eigenpair of `(D - W)x = λDx` via Jacobi on the
/// normalized Laplacian, D-normalized, largest-magnitude entry positive.
pub fn oracle_fiedler(w: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = w.len();
    let d: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
    let l: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (if i == j { 1.0 } else { 0.0 }) - w[i][j] / (d[i] * d[j]).sqrt()).collect())
        .collect();
    let (vals, vecs) = jacobi_eigen(&l);
    let mut x: Vec<f64> = (0..n).map(|i| vecs[i][1] / d[i].sqrt()).collect();
    let norm = x.iter().zip(&d).map(|(v, d)| v * v * d).sum::<f64>().sqrt();
    let big = x.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    let s = big.signum() / norm;
    for v in &mut x {
        *v *= s;
    }
    (vals[1], x)
}

/// `‖(D - W)x - λDx‖ / ‖Dx‖`.
pub fn generalized_residual(w: &[Vec<f64>], x: &[f64], lambda: f64) -> f64 {
    let n = w.len();
    let d: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
    let (mut r2, mut dx2) = (0.0, 0.0);
    for i in 0..n {
        let wx: f64 = (0..n).map(|j| w[i][j] * x[j]).sum();
        let r = d[i] * x[i] - wx - lambda * d[i] * x[i];
        r2 += r * r;
        dx2 += (d[i] * x[i]).powi(2);
    }
    (r2 / dx2).sqrt()
}
