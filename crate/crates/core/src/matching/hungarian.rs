//! Minimum-cost perfect assignment on a square cost matrix.
//!
//! The optimum is found with the O(n³) shortest-augmenting-path form of the
//! Hungarian method, which also yields an optimal dual. Among all optimal
//! assignments the lexicographically smallest one is then selected inside the
//! equality subgraph of that dual (every optimal assignment lives there, by
//! complementary slackness).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// `assignment[row]` is the column assigned to `row`.
    pub assignment: Vec<usize>,
    pub total_cost: f64,
}

/// Square cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n} matrix"),
                actual: format!("{} entries", data.len()),
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} columns"),
                actual: format!("{} columns", r.len()),
            });
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn cost_of(&self, assignment: &[usize]) -> f64 {
        assignment.iter().enumerate().map(|(r, &c)| self.get(r, c)).sum()
    }
}

pub fn hungarian(cost: &CostMatrix) -> Result<MatchResult> {
    if let Some(v) = cost.data.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!("non-finite cost {v}")));
    }
    let n = cost.n;
    if n == 0 {
        return Ok(MatchResult {
            assignment: Vec::new(),
            total_cost: 0.0,
        });
    }

    // potentials u (rows) and v (cols), 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        row_of_col[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = row_of_col[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost.get(r0 - 1, col - 1) - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[row_of_col[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if row_of_col[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            row_of_col[col0] = row_of_col[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        assignment[row_of_col[col] - 1] = col - 1;
    }

    let scale = cost.data.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-9 * scale;
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|r| (0..n).map(|c| (cost.get(r, c) - u[r + 1] - v[c + 1]).abs() <= tol).collect())
        .collect();
    let assignment = lexicographic_tight_matching(&tight, &assignment);

    Ok(MatchResult {
        total_cost: cost.cost_of(&assignment),
        assignment,
    })
}

/// Smallest perfect matching in lexicographic order over the tight edges.
/// `fallback` is a known perfect matching inside `tight`.
fn lexicographic_tight_matching(tight: &[Vec<bool>], fallback: &[usize]) -> Vec<usize> {
    let n = tight.len();
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut col_taken = vec![false; n];
    for row in 0..n {
        let choice = (0..n).find(|&c| {
            if !tight[row][c] || col_taken[c] {
                return false;
            }
            col_taken[c] = true;
            let ok = has_perfect_matching(tight, row + 1, &col_taken);
            col_taken[c] = false;
            ok
        });
        match choice {
            Some(c) => {
                fixed.push(c);
                col_taken[c] = true;
            }
            // tolerance left the tight graph without a completion; keep the solver's answer
            None => return fallback.to_vec(),
        }
    }
    fixed
}

/// Kuhn's augmenting paths on rows `first_row..n` against the free columns.
fn has_perfect_matching(tight: &[Vec<bool>], first_row: usize, col_taken: &[bool]) -> bool {
    let n = tight.len();
    let mut match_of_col: Vec<Option<usize>> = vec![None; n];

    fn augment(
        row: usize,
        tight: &[Vec<bool>],
        col_taken: &[bool],
        seen: &mut [bool],
        match_of_col: &mut [Option<usize>],
    ) -> bool {
        for c in 0..tight.len() {
            if !tight[row][c] || col_taken[c] || seen[c] {
                continue;
            }
            seen[c] = true;
            let free = match match_of_col[c] {
                None => true,
                Some(other) => augment(other, tight, col_taken, seen, match_of_col),
            };
            if free {
                match_of_col[c] = Some(row);
                return true;
            }
        }
        false
    }

    (first_row..n).all(|row| {
        let mut seen = vec![false; n];
        augment(row, tight, col_taken, &mut seen, &mut match_of_col)
    })
}
