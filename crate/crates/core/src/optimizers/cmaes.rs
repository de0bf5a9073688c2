//! CMA-ES with rank-one and rank-μ covariance updates and cumulative step
//! size adaptation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{uniform_point, Evaluated, Optimizer};
use crate::codesign::Objective;
use crate::error::{Error, Result};
use crate::rng::{substream, tag};

/// Condition number of `C` beyond which the search state is reset.
pub const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaesConfig {
    pub population: usize,
    /// Fraction of the population that forms the recombination parents.
    pub elite_ratio: f64,
    pub sigma0: f64,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        Self { population: 16, elite_ratio: 0.5, sigma0: 0.3 }
    }
}

pub struct CmaEs {
    cfg: CmaesConfig,
    seed: u64,
    n: usize,
    mu: usize,
    weights: Vec<f64>,
    mueff: f64,
    cc: f64,
    cs: f64,
    c1: f64,
    cmu: f64,
    damps: f64,
    chi_n: f64,
    mean: DVector<f64>,
    sigma: f64,
    c: DMatrix<f64>,
    b: DMatrix<f64>,
    d: DVector<f64>,
    pc: DVector<f64>,
    ps: DVector<f64>,
    generation: usize,
    resets: usize,
}

impl CmaEs {
    pub fn new(cfg: CmaesConfig, dim: usize, seed: u64) -> Result<Self> {
        if cfg.population < 4 || !(cfg.elite_ratio > 0.0 && cfg.elite_ratio <= 1.0) || !(cfg.sigma0 > 0.0) || dim == 0 {
            return Err(Error::Config("cmaes needs population >= 4, elite_ratio in (0, 1], sigma0 > 0".into()));
        }
        let n = dim as f64;
        let mu = ((cfg.population as f64 * cfg.elite_ratio).ceil() as usize).clamp(1, cfg.population);
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
        let cs = (mueff + 2.0) / (n + mueff + 5.0);
        let c1 = 2.0 / ((n + 1.3).powi(2) + mueff);
        let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0).powi(2) + mueff));
        let damps = 1.0 + 2.0 * (((mueff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + cs;
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        let mean = DVector::from_vec(uniform_point(dim, &mut substream(seed, &[tag::INIT])));
        Ok(Self {
            seed,
            n: dim,
            mu,
            weights,
            mueff,
            cc,
            cs,
            c1,
            cmu,
            damps,
            chi_n,
            mean,
            sigma: cfg.sigma0,
            c: DMatrix::identity(dim, dim),
            b: DMatrix::identity(dim, dim),
            d: DVector::from_element(dim, 1.0),
            pc: DVector::zeros(dim),
            ps: DVector::zeros(dim),
            generation: 0,
            resets: 0,
            cfg,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Times the state was reset after a numerical breakdown.
    pub fn resets(&self) -> usize {
        self.resets
    }

    fn reset(&mut self) {
        self.resets += 1;
        self.sigma = self.cfg.sigma0;
        self.c = DMatrix::identity(self.n, self.n);
        self.b = DMatrix::identity(self.n, self.n);
        self.d = DVector::from_element(self.n, 1.0);
        self.pc = DVector::zeros(self.n);
        self.ps = DVector::zeros(self.n);
    }

    /// Re-derives `B`, `D` from `C`; false when `C` has broken down.
    fn refresh_eigensystem(&mut self) -> bool {
        if !self.sigma.is_finite() || self.sigma <= 0.0 || self.c.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let sym = (&self.c + self.c.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let (min, max) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(min > 0.0) || max / min > MAX_CONDITION {
            return false;
        }
        self.c = sym;
        self.b = eig.eigenvectors;
        self.d = eig.eigenvalues.map(f64::sqrt);
        true
    }
}

impl Optimizer for CmaEs {
    fn name(&self) -> &str {
        "cmaes"
    }

    fn evals_per_iteration(&self) -> usize {
        self.cfg.population
    }

    fn step(&mut self, obj: &dyn Objective, t: usize) -> Result<Vec<Evaluated>> {
        let lambda = self.cfg.population;
        let xs: Vec<Vec<f64>> = (0..lambda)
            .map(|k| {
                let mut rng = substream(self.seed, &[tag::POPULATION, t as u64, k as u64]);
                let z = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &self.b * z.component_mul(&self.d);
                (0..self.n).map(|i| (self.mean[i] + self.sigma * y[i]).clamp(0.0, 1.0)).collect()
            })
            .collect();
        let losses: Vec<f64> = xs.par_iter().map(|x| obj.value(x).loss).collect();

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));
        let old = self.mean.clone();
        // steps of the repaired (clamped) points
        let ys: Vec<DVector<f64>> =
            order[..self.mu].iter().map(|&k| (DVector::from_column_slice(&xs[k]) - &old) / self.sigma).collect();
        let yw = ys.iter().zip(&self.weights).fold(DVector::zeros(self.n), |acc, (y, w)| acc + y * *w);
        self.mean = &old + &yw * self.sigma;

        let inv_sqrt_c = &self.b * DMatrix::from_diagonal(&self.d.map(|v| 1.0 / v)) * self.b.transpose();
        self.ps = &self.ps * (1.0 - self.cs) + (&inv_sqrt_c * &yw) * (self.cs * (2.0 - self.cs) * self.mueff).sqrt();
        let gen = (self.generation + 1) as f64;
        let ps_norm = self.ps.norm();
        let hsig = ps_norm / (1.0 - (1.0 - self.cs).powf(2.0 * gen)).sqrt() / self.chi_n < 1.4 + 2.0 / (self.n as f64 + 1.0);
        let h = if hsig { 1.0 } else { 0.0 };
        self.pc = &self.pc * (1.0 - self.cc) + &yw * (h * (self.cc * (2.0 - self.cc) * self.mueff).sqrt());

        let rank_mu = ys.iter().zip(&self.weights).fold(DMatrix::zeros(self.n, self.n), |acc, (y, w)| acc + y * y.transpose() * *w);
        let rank_one = &self.pc * self.pc.transpose() + &self.c * ((1.0 - h) * self.cc * (2.0 - self.cc));
        self.c = &self.c * (1.0 - self.c1 - self.cmu) + rank_one * self.c1 + rank_mu * self.cmu;
        self.sigma *= ((self.cs / self.damps) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;

        if !self.refresh_eigensystem() {
            self.reset();
        }
        Ok(xs.into_iter().zip(losses).collect())
    }
}
