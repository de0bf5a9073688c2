use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectrum::{
    alignment_ratio, covariance, cumulative_explained_variance, effective_dimensionality, eigendecompose, GradientMatrix,
};
use crate::codesign::{BoxView, Objective, ParameterSpace, Task};
use crate::error::{check_len, Error, Result};
use crate::optimizers::RunRecord;

/// Gradient-covariance statistics of one region, in unit-box coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionStats {
    pub mean: Vec<f64>,
    pub sigma: f64,
    /// Gradients that entered the covariance.
    pub n: usize,
    /// Samples whose rollout failed; they are left out of the covariance.
    pub failed: usize,
    pub eigenvalues: Vec<f64>,
    pub explained: Vec<f64>,
    pub effective_dimensionality: f64,
    pub align_m: f64,
    pub align_c: f64,
    pub best_loss: f64,
    pub best_point: Vec<f64>,
    #[serde(skip)]
    pub covariance: DMatrix<f64>,
    /// Columns are eigenvectors, in eigenvalue order.
    #[serde(skip)]
    pub eigenvectors: DMatrix<f64>,
}

impl RegionStats {
    /// Fraction of variance carried by the top `k` directions.
    pub fn explained_at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.explained[(k - 1).min(self.explained.len() - 1)]
        }
    }

    /// JSON form; eigenvectors (as a list of columns) only when `full`.
    pub fn to_json(&self, full: bool) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("region stats serialize");
        if full {
            let cols: Vec<Vec<f64>> = self.eigenvectors.column_iter().map(|c| c.iter().copied().collect()).collect();
            v["eigenvectors"] = serde_json::to_value(cols).expect("eigenvectors serialize");
        }
        v
    }

    /// Reads the eigenvector columns back from [`to_json`](Self::to_json)
    /// output written with `full = true`.
    pub fn eigenvectors_from_json(v: &serde_json::Value) -> Option<Vec<Vec<f64>>> {
        serde_json::from_value(v.get("eigenvectors")?.clone()).ok()
    }
}

/// Statistics from an explicit set of gradients.
pub fn region_from_gradients(
    gradients: &[Vec<f64>],
    losses: &[f64],
    points: &[Vec<f64>],
    space: &ParameterSpace,
    mean: Vec<f64>,
    sigma: f64,
    failed: usize,
) -> Result<RegionStats> {
    check_len(gradients.len(), losses.len())?;
    let gm = GradientMatrix::new(gradients, mean, sigma)?;
    let c = covariance(&gm);
    let (v, lambda) = eigendecompose(&c)?;
    let (explained, _) = cumulative_explained_variance(&lambda);
    let ed = effective_dimensionality(&lambda)?;
    let (align_m, align_c) = alignment_ratio(gradients, space)?;
    let best = (0..losses.len()).min_by(|&a, &b| losses[a].total_cmp(&losses[b])).unwrap_or(0);
    Ok(RegionStats {
        mean: gm.mean,
        sigma,
        n: gm.n,
        failed,
        eigenvalues: lambda,
        explained,
        effective_dimensionality: ed,
        align_m,
        align_c,
        best_loss: losses[best],
        best_point: points.get(best).cloned().unwrap_or_default(),
        covariance: c,
        eigenvectors: v,
    })
}

/// Samples `n` Gaussian points (box sigma) around `mean`, evaluates their
/// gradients in parallel and analyzes the resulting covariance.
pub fn analyze_objective<R: Rng + ?Sized>(
    obj: &dyn Objective,
    space: &ParameterSpace,
    mean: &[f64],
    sigma: f64,
    n: usize,
    rng: &mut R,
) -> Result<RegionStats> {
    check_len(obj.dim(), mean.len())?;
    if n == 0 || !(sigma >= 0.0) {
        return Err(Error::InvalidArgument("region analysis needs n >= 1 and sigma >= 0".into()));
    }
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            mean.iter()
                .map(|&c| {
                    let eta: f64 = StandardNormal.sample(rng);
                    (c + sigma * eta).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect();
    let samples: Vec<_> = points.par_iter().map(|z| obj.value_and_gradient(z)).collect();
    let failed = samples.iter().filter(|s| s.failed).count();
    if failed == n {
        return Err(Error::DegenerateSpectrum(format!("all {n} samples failed")));
    }
    let mut grads = Vec::with_capacity(n - failed);
    let mut losses = Vec::with_capacity(n - failed);
    let mut kept = Vec::with_capacity(n - failed);
    for (s, z) in samples.into_iter().zip(points) {
        if !s.failed {
            grads.push(s.gradient);
            losses.push(s.loss);
            kept.push(z);
        }
    }
    region_from_gradients(&grads, &losses, &kept, space, mean.to_vec(), sigma, failed)
}

/// [`analyze_objective`] on a task's unit-box view.
pub fn analyze_region<R: Rng + ?Sized>(task: &dyn Task, mean: &[f64], sigma: f64, n: usize, rng: &mut R) -> Result<RegionStats> {
    analyze_objective(&BoxView::new(task), task.space(), mean, sigma, n, rng)
}

/// A region center picked from an optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestedRegion {
    pub record: usize,
    pub iteration: usize,
    pub loss: f64,
    pub point: Vec<f64>,
}

/// Per-iteration best points at iterations `0, stride, 2·stride, …` of every
/// record, taken round-robin across records until `count` are collected.
pub fn harvest_regions(records: &[RunRecord], count: usize, stride: usize) -> Result<Vec<HarvestedRegion>> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    if records.iter().all(|r| r.iterations.is_empty()) {
        return Err(Error::InvalidArgument("no run records with iterations to harvest from".into()));
    }
    let queues: Vec<Vec<HarvestedRegion>> = records
        .iter()
        .enumerate()
        .map(|(ri, r)| {
            r.iterations
                .iter()
                .step_by(stride)
                .map(|it| HarvestedRegion {
                    record: ri,
                    iteration: it.iteration,
                    loss: it.iteration_best_loss,
                    point: it.iteration_best_x.clone(),
                })
                .collect()
        })
        .collect();
    let longest = queues.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::new();
    'outer: for k in 0..longest {
        for q in &queues {
            if out.len() == count {
                break 'outer;
            }
            if let Some(h) = q.get(k) {
                out.push(h.clone());
            }
        }
    }
    Ok(out)
}
