use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::heatmap::{connected_components, threshold, Connectivity, Heatmap};

/// Absolute binarization level for segmentation maps.
pub const SEGMENTATION_THRESHOLD: f64 = 0.5;

/// Box of the largest 8-connected component of `m >= 0.5`; ties go to the
/// component found first in raster order.
pub fn move_box(m: &Heatmap) -> Result<BBox> {
    let labels = connected_components(&threshold(m, SEGMENTATION_THRESHOLD), Connectivity::Eight);
    let areas = labels.areas();
    let mut best: Option<usize> = None;
    for (i, &a) in areas.iter().enumerate() {
        if best.is_none_or(|b| a > areas[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or(Error::EmptySegmentation)?;
    let b = labels.bounds()[best];
    Ok(m.pixel_box(b.0, b.1, b.2, b.3))
}
