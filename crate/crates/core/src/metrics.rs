//! Overall accuracy and boundary agreement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::LabelMap;
use crate::superpixel::Neighborhood;

/// Fraction of masked pixels whose predicted label equals the truth.
pub fn overall_accuracy(predicted: &LabelMap, truth: &LabelMap, mask: &[bool]) -> Result<f64> {
    if predicted.height() != truth.height() || predicted.width() != truth.width() || mask.len() != truth.len() {
        return Err(Error::shape("overall_accuracy", "maps and mask must share dimensions"));
    }
    let total = mask.iter().filter(|&&m| m).count();
    if total == 0 {
        return Err(Error::invalid("mask", "selects no pixels"));
    }
    let correct = (0..mask.len())
        .filter(|&i| mask[i] && predicted.labels()[i] == truth.labels()[i])
        .count();
    Ok(correct as f64 / total as f64)
}

/// Per-pixel boundary indicator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<bool>,
}

impl BoundaryMap {
    pub fn fraction(&self) -> f64 {
        self.values.iter().filter(|&&b| b).count() as f64 / self.values.len().max(1) as f64
    }
}

/// A pixel is on a boundary when some in-image neighbour carries a
/// different label. Label 0 counts as an ordinary background class.
pub fn boundary_map(labels: &LabelMap, neighborhood: Neighborhood) -> BoundaryMap {
    let (h, w) = (labels.height(), labels.width());
    let l = labels.labels();
    let mut values = vec![false; h * w];
    let offsets: &[(isize, isize)] = match neighborhood {
        Neighborhood::Four => &[(0, 1), (1, 0), (0, -1), (-1, 0)],
        Neighborhood::Eight => &[(0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    };
    for r in 0..h {
        for c in 0..w {
            let here = l[r * w + c];
            values[r * w + c] = offsets.iter().any(|&(dr, dc)| {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w && l[rr as usize * w + cc as usize] != here
            });
        }
    }
    BoundaryMap { height: h, width: w, values }
}

/// Fraction of all pixels where the boundary indicators of the two maps agree.
pub fn boundary_accuracy(predicted: &LabelMap, truth: &LabelMap, neighborhood: Neighborhood) -> Result<f64> {
    if predicted.height() != truth.height() || predicted.width() != truth.width() {
        return Err(Error::shape("boundary_accuracy", "maps must share dimensions"));
    }
    if truth.is_empty() {
        return Ok(1.0);
    }
    let a = boundary_map(predicted, neighborhood);
    let b = boundary_map(truth, neighborhood);
    let agree = a.values.iter().zip(&b.values).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / truth.len() as f64)
}
