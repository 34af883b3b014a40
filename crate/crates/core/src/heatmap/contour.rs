//! Outer-border following (Suzuki–Abe) on a binary mask.
//!
//! Only the outermost border of each 8-connected component is traced. Each
//! trace starts at the component's first pixel in raster order, whose left
//! neighbor is always background, so every component yields exactly one
//! closed contour.

use super::components::{connected_components, Connectivity};
use super::BinaryMask;

/// Neighbor offsets `(dx, dy)` in clockwise order on screen (y grows down),
/// starting from east.
const RING: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    /// `(x, y)` pixel coordinates, successive points 8-adjacent, implicitly closed.
    pub points: Vec<(usize, usize)>,
    /// Label of the traced component, as assigned by 8-connected labeling.
    pub component: u32,
}

impl Contour {
    /// Inclusive pixel bounds `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (usize, usize, usize, usize) {
        self.points.iter().fold(
            (usize::MAX, usize::MAX, 0, 0),
            |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn direction_of(from: (usize, usize), to: (usize, usize)) -> usize {
    let d = (to.0 as i64 - from.0 as i64, to.1 as i64 - from.1 as i64);
    RING.iter().position(|&r| r == d).expect("pixels are not 8-adjacent")
}

struct Tracer<'a> {
    mask: &'a BinaryMask,
}

impl Tracer<'_> {
    fn neighbor(&self, p: (usize, usize), dir: usize) -> Option<(usize, usize)> {
        let (dx, dy) = RING[dir % 8];
        let x = p.0 as i64 + dx;
        let y = p.1 as i64 + dy;
        if x < 0 || y < 0 || x >= self.mask.width as i64 || y >= self.mask.height as i64 {
            return None;
        }
        let q = (x as usize, y as usize);
        self.mask.get(q.0, q.1).then_some(q)
    }

    /// First foreground neighbor of `center`, scanning from `start_dir`
    /// (exclusive when `skip_start`) in the given rotational sense.
    fn scan(&self, center: (usize, usize), start_dir: usize, clockwise: bool, skip_start: bool) -> Option<(usize, usize)> {
        let first = usize::from(skip_start);
        (first..first + 8).find_map(|i| {
            let dir = if clockwise {
                (start_dir + i) % 8
            } else {
                (start_dir + 8 * 2 - i) % 8
            };
            self.neighbor(center, dir)
        })
    }

    fn follow(&self, start: (usize, usize)) -> Vec<(usize, usize)> {
        // the pixel to the west of `start` is background by construction
        let west = 4;
        let Some(first) = self.scan(start, west, true, false) else {
            return vec![start];
        };
        let mut points = Vec::new();
        let mut prev = first;
        let mut cur = start;
        loop {
            let back = direction_of(cur, prev);
            let next = self
                .scan(cur, back, false, true)
                .expect("a non-isolated pixel has a foreground neighbor");
            points.push(cur);
            if next == start && cur == first {
                break;
            }
            prev = cur;
            cur = next;
        }
        points
    }
}

/// One outer contour per 8-connected foreground component, in the raster
/// order of the components' first pixels.
pub fn trace_contours(mask: &BinaryMask) -> Vec<Contour> {
    let labels = connected_components(mask, Connectivity::Eight);
    let mut starts = vec![None; labels.count];
    for y in 0..mask.height {
        for x in 0..mask.width {
            let l = labels.get(x, y);
            if l > 0 && starts[l as usize - 1].is_none() {
                starts[l as usize - 1] = Some((x, y));
            }
        }
    }
    let tracer = Tracer { mask };
    starts
        .into_iter()
        .enumerate()
        .map(|(i, s)| Contour {
            points: tracer.follow(s.expect("every label has a first pixel")),
            component: i as u32 + 1,
        })
        .collect()
}
