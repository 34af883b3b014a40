//! Axis-aligned boxes in normalized center/size form, overlap measures and
//! the enclosing union of a box set.
//!
//! Coordinates are fractions of the image width/height. Nothing here clamps:
//! boxes that drift outside the unit square during optimization are measured
//! as they are, and clamping happens only when writing documents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Box in center/size form. Width and height are expected to be non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

/// Corner form `(x0, y0, x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Corners {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Corners {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn to_box(self) -> BBox {
        from_corners(self)
    }
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        from_corners(Corners::new(x0, y0, x1, y1))
    }

    pub fn corners(&self) -> Corners {
        to_corners(self)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Center inside the unit square and non-negative extent.
    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
            && (0.0..=1.0).contains(&self.cx)
            && (0.0..=1.0).contains(&self.cy)
            && self.w >= 0.0
            && self.h >= 0.0
    }

    /// Clip the corners to the unit square.
    pub fn clamped(&self) -> BBox {
        let c = self.corners();
        let x0 = c.x0.clamp(0.0, 1.0);
        let y0 = c.y0.clamp(0.0, 1.0);
        let x1 = c.x1.clamp(0.0, 1.0).max(x0);
        let y1 = c.y1.clamp(0.0, 1.0).max(y0);
        BBox::from_corners(x0, y0, x1, y1)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.cx + dx, self.cy + dy, self.w, self.h)
    }

    /// Inclusive point containment.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let c = self.corners();
        x >= c.x0 && x <= c.x1 && y >= c.y0 && y <= c.y1
    }
}

/// A box with a non-negative confidence score.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub score: f64,
}

impl ScoredBox {
    pub fn new(bbox: BBox, score: f64) -> Self {
        Self { bbox, score }
    }
}

/// Predicted box with an (object, no-object) logit pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PredBox {
    pub bbox: BBox,
    pub logits: [f64; 2],
}

impl PredBox {
    pub fn new(bbox: BBox, logit_object: f64, logit_no_object: f64) -> Self {
        Self {
            bbox,
            logits: [logit_object, logit_no_object],
        }
    }

    /// Softmax probability of the object class.
    pub fn objectness(&self) -> f64 {
        let z = self.logits[0] - self.logits[1];
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    /// The six free parameters `(cx, cy, w, h, l_obj, l_noobj)`.
    pub fn params(&self) -> [f64; 6] {
        let b = self.bbox;
        [b.cx, b.cy, b.w, b.h, self.logits[0], self.logits[1]]
    }

    pub fn from_params(p: [f64; 6]) -> Self {
        Self::new(BBox::new(p[0], p[1], p[2], p[3]), p[4], p[5])
    }
}

/// Matching target. Padding targets are the zero box with `is_object = false`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TargetBox {
    pub bbox: BBox,
    pub is_object: bool,
}

impl TargetBox {
    pub fn object(bbox: BBox) -> Self {
        Self { bbox, is_object: true }
    }

    pub fn padding() -> Self {
        Self::default()
    }
}

pub fn to_corners(b: &BBox) -> Corners {
    Corners {
        x0: b.cx - b.w / 2.0,
        y0: b.cy - b.h / 2.0,
        x1: b.cx + b.w / 2.0,
        y1: b.cy + b.h / 2.0,
    }
}

pub fn from_corners(c: Corners) -> BBox {
    BBox {
        cx: (c.x0 + c.x1) / 2.0,
        cy: (c.y0 + c.y1) / 2.0,
        w: c.x1 - c.x0,
        h: c.y1 - c.y0,
    }
}

fn overlap(a: &Corners, b: &Corners) -> f64 {
    let iw = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let ih = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    iw * ih
}

fn enclosing(a: &Corners, b: &Corners) -> Corners {
    Corners {
        x0: a.x0.min(b.x0),
        y0: a.y0.min(b.y0),
        x1: a.x1.max(b.x1),
        y1: a.y1.max(b.y1),
    }
}

/// Intersection over union. Zero when the union has no area.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    iou_corners(&a.corners(), &b.corners())
}

pub fn iou_corners(a: &Corners, b: &Corners) -> f64 {
    let inter = overlap(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Generalized IoU: `iou - |C \ (A ∪ B)| / |C|` with `C` the smallest
/// enclosing box. Zero when `C` has no area.
pub fn giou(a: &BBox, b: &BBox) -> f64 {
    giou_corners(&a.corners(), &b.corners())
}

pub fn giou_corners(a: &Corners, b: &Corners) -> f64 {
    let c = enclosing(a, b).area();
    if c <= 0.0 {
        return 0.0;
    }
    let inter = overlap(a, b);
    let union = a.area() + b.area() - inter;
    let iou = if union <= 0.0 { 0.0 } else { inter / union };
    iou - (c - union) / c
}

/// Gradient of `giou(pred, target)` with respect to `(cx, cy, w, h)` of `pred`.
///
/// Piecewise rational in the corners; at a corner tie (pred edge equal to the
/// target edge) the min/max branches contribute zero, which makes the
/// gradient vanish at `pred == target`.
pub fn giou_grad(pred: &BBox, target: &BBox) -> [f64; 4] {
    let a = pred.corners();
    let b = target.corners();

    let cw = a.x1.max(b.x1) - a.x0.min(b.x0);
    let ch = a.y1.max(b.y1) - a.y0.min(b.y0);
    let c = cw * ch;
    if c <= 0.0 {
        return [0.0; 4];
    }

    let iw_raw = a.x1.min(b.x1) - a.x0.max(b.x0);
    let ih_raw = a.y1.min(b.y1) - a.y0.max(b.y0);
    let iw = iw_raw.max(0.0);
    let ih = ih_raw.max(0.0);
    let inter = iw * ih;
    let aw = a.x1 - a.x0;
    let ah = a.y1 - a.y0;
    let union = aw * ah + b.area() - inter;

    // partials with respect to (x0, y0, x1, y1) of pred
    let d_area = [-ah, -aw, ah, aw];
    let mut d_inter = [0.0; 4];
    if iw_raw > 0.0 && ih_raw > 0.0 {
        if a.x0 > b.x0 {
            d_inter[0] = -ih;
        }
        if a.y0 > b.y0 {
            d_inter[1] = -iw;
        }
        if a.x1 < b.x1 {
            d_inter[2] = ih;
        }
        if a.y1 < b.y1 {
            d_inter[3] = iw;
        }
    }
    let mut d_enc = [0.0; 4];
    if a.x0 < b.x0 {
        d_enc[0] = -ch;
    }
    if a.y0 < b.y0 {
        d_enc[1] = -cw;
    }
    if a.x1 > b.x1 {
        d_enc[2] = ch;
    }
    if a.y1 > b.y1 {
        d_enc[3] = cw;
    }

    let mut d = [0.0; 4];
    for i in 0..4 {
        let d_union = d_area[i] - d_inter[i];
        // giou = inter/union - 1 + union/c
        let d_iou = if union > 0.0 {
            d_inter[i] / union - inter * d_union / (union * union)
        } else {
            0.0
        };
        d[i] = d_iou + d_union / c - union * d_enc[i] / (c * c);
    }

    // x0 = cx - w/2, x1 = cx + w/2
    [
        d[0] + d[2],
        d[1] + d[3],
        0.5 * (d[2] - d[0]),
        0.5 * (d[3] - d[1]),
    ]
}

/// Minimal axis-aligned box containing every input box.
pub fn union_box<'a, I>(boxes: I) -> Result<BBox>
where
    I: IntoIterator<Item = &'a BBox>,
{
    let mut acc: Option<Corners> = None;
    for b in boxes {
        let c = b.corners();
        acc = Some(match acc {
            None => c,
            Some(u) => enclosing(&u, &c),
        });
    }
    acc.map(from_corners).ok_or(Error::EmptyBoxSet)
}
