use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codesign::Objective;
use crate::error::{check_len, Error, Result};

pub const DEFAULT_RESOLUTION: usize = 50;

/// Losses on `center + α·dir_a + β·dir_b` over a square grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Row-major: `losses[i · resolution + j]` is at `(alphas[i], betas[j])`.
    pub losses: Vec<f64>,
    pub diverged: Vec<bool>,
}

impl SliceGrid {
    pub fn resolution(&self) -> usize {
        self.alphas.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.losses[i * self.resolution() + j]
    }

    pub fn min(&self) -> f64 {
        self.losses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.losses.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidArgument("slice direction must be a nonzero finite vector".into()));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Evaluates the objective on a `resolution × resolution` grid with
/// `α, β ∈ [−half_extent, half_extent]`. Directions are normalized and grid
/// points are clamped into the unit box.
pub fn slice_grid(
    obj: &dyn Objective,
    center: &[f64],
    dir_a: &[f64],
    dir_b: &[f64],
    half_extent: f64,
    resolution: usize,
) -> Result<SliceGrid> {
    let m = obj.dim();
    check_len(m, center.len())?;
    check_len(m, dir_a.len())?;
    check_len(m, dir_b.len())?;
    if resolution < 2 || !(half_extent > 0.0) {
        return Err(Error::InvalidArgument("slice needs resolution >= 2 and half_extent > 0".into()));
    }
    let (a, b) = (unit(dir_a)?, unit(dir_b)?);
    let axis: Vec<f64> =
        (0..resolution).map(|k| -half_extent + 2.0 * half_extent * k as f64 / (resolution - 1) as f64).collect();
    let cells: Vec<_> = (0..resolution * resolution)
        .into_par_iter()
        .map(|c| {
            let (al, be) = (axis[c / resolution], axis[c % resolution]);
            let z: Vec<f64> = (0..m).map(|d| (center[d] + al * a[d] + be * b[d]).clamp(0.0, 1.0)).collect();
            obj.value(&z)
        })
        .collect();
    Ok(SliceGrid {
        alphas: axis.clone(),
        betas: axis,
        losses: cells.iter().map(|s| s.loss).collect(),
        diverged: cells.iter().map(|s| s.failed).collect(),
    })
}
