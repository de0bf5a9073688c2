//! Particle filter optimization, with and without gradient-covariance bias.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Evaluated, Optimizer};
use crate::codesign::Objective;
use crate::error::{Error, Result};
use crate::landscape::{covariance, eigendecompose, GradientMatrix, NEGATIVE_TOLERANCE};
use crate::rng::{substream, tag};

/// How the covariance spectrum shapes particle moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// `β = V · diag(λ / (tr Λ + ε))`
    #[default]
    TraceNormalized,
    /// `β = V · diag(λ / (tr Λ + ε))^{1/2}`
    Sqrt,
    /// `β = I`: isotropic moves, covariance ignored.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PfoConfig {
    pub regions: usize,
    pub particles: usize,
    /// Standard deviation of the move noise, in box units.
    pub sigma: f64,
    pub tau0: f64,
    /// Annealing horizon `T`.
    pub iterations: usize,
    pub epsilon: f64,
    pub beta_mode: BetaMode,
}

impl Default for PfoConfig {
    fn default() -> Self {
        Self { regions: 5, particles: 50, sigma: 0.1, tau0: 1.0, iterations: 50, epsilon: 1e-8, beta_mode: BetaMode::TraceNormalized }
    }
}

impl PfoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.regions == 0 || self.particles < 2 || !(self.sigma >= 0.0) || !(self.tau0 > 0.0) || self.iterations == 0 || !(self.epsilon > 0.0)
        {
            return Err(Error::Config("particle filter needs regions >= 1, particles >= 2, sigma >= 0, tau0 > 0, iterations >= 1, epsilon > 0".into()));
        }
        Ok(())
    }
}

/// `1 / (1 + τ₀ · t / T)`
pub fn anneal_temperature(tau0: f64, t: usize, total: usize) -> f64 {
    1.0 / (1.0 + tau0 * t as f64 / total as f64)
}

/// Softmax of `−loss / τ`, shifted by the minimum loss.
pub fn resample_probabilities(losses: &[f64], tau: f64) -> Vec<f64> {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = losses.iter().map(|l| (-(l - min) / tau).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Draws `losses.len()` indices i.i.d. from [`resample_probabilities`].
pub fn resample<R: Rng + ?Sized>(losses: &[f64], tau: f64, rng: &mut R) -> Vec<usize> {
    let p = resample_probabilities(losses, tau);
    let dist = WeightedIndex::new(&p).expect("softmax weights are positive and finite");
    (0..losses.len()).map(|_| dist.sample(rng)).collect()
}

/// Bias matrix from an eigendecomposition.
pub fn bias_matrix(v: &DMatrix<f64>, lambda: &[f64], epsilon: f64, mode: BetaMode) -> Result<DMatrix<f64>> {
    let m = v.nrows();
    if lambda.len() != v.ncols() {
        return Err(Error::DimensionMismatch { expected: v.ncols(), got: lambda.len() });
    }
    if let Some(l) = lambda.iter().find(|&&l| l < -NEGATIVE_TOLERANCE) {
        return Err(Error::DegenerateSpectrum(format!("negative eigenvalue {l:e}")));
    }
    let trace: f64 = lambda.iter().map(|l| l.max(0.0)).sum();
    let scale: Vec<f64> = lambda
        .iter()
        .map(|l| {
            let t = l.max(0.0) / (trace + epsilon);
            match mode {
                BetaMode::TraceNormalized => t,
                BetaMode::Sqrt => t.sqrt(),
                BetaMode::Identity => 1.0,
            }
        })
        .collect();
    if mode == BetaMode::Identity {
        return Ok(DMatrix::identity(m, m));
    }
    Ok(v * DMatrix::from_diagonal(&DVector::from_vec(scale)))
}

/// GC-PFO, or plain PFO when `use_gradients` is false and moves are
/// isotropic.
pub struct ParticleFilter {
    cfg: PfoConfig,
    use_gradients: bool,
    seed: u64,
    dim: usize,
    /// `[region][particle]`, box coordinates.
    particles: Vec<Vec<Vec<f64>>>,
}

impl ParticleFilter {
    pub fn new(cfg: PfoConfig, use_gradients: bool, dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let particles = (0..cfg.regions)
            .map(|r| {
                let mut rng = substream(seed, &[tag::INIT, r as u64]);
                (0..cfg.particles).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
            })
            .collect();
        Ok(Self { cfg, use_gradients, seed, dim, particles })
    }

    pub fn gcpfo(cfg: PfoConfig, dim: usize, seed: u64) -> Result<Self> {
        Self::new(cfg, true, dim, seed)
    }

    pub fn pfo(mut cfg: PfoConfig, dim: usize, seed: u64) -> Result<Self> {
        cfg.beta_mode = BetaMode::Identity;
        Self::new(cfg, false, dim, seed)
    }

    pub fn particles(&self) -> &[Vec<Vec<f64>>] {
        &self.particles
    }
}

impl Optimizer for ParticleFilter {
    fn name(&self) -> &str {
        if self.use_gradients {
            "gcpfo"
        } else {
            "pfo"
        }
    }

    fn evals_per_iteration(&self) -> usize {
        self.cfg.regions * self.cfg.particles
    }

    fn step(&mut self, obj: &dyn Objective, t: usize) -> Result<Vec<Evaluated>> {
        let (nr, np) = (self.cfg.regions, self.cfg.particles);
        let flat: Vec<&Vec<f64>> = self.particles.iter().flatten().collect();
        let samples: Vec<_> = flat
            .par_iter()
            .map(|x| if self.use_gradients { obj.value_and_gradient(x) } else { obj.value(x) })
            .collect();
        let evaluated: Vec<Evaluated> = flat.iter().zip(&samples).map(|(x, s)| ((*x).clone(), s.loss)).collect();

        let tau = anneal_temperature(self.cfg.tau0, t, self.cfg.iterations);
        let sigma = self.cfg.sigma;
        for r in 0..nr {
            let region = &samples[r * np..(r + 1) * np];
            let losses: Vec<f64> = region.iter().map(|s| s.loss).collect();
            let mut rng = substream(self.seed, &[tag::RESAMPLE, t as u64, r as u64]);
            let picks = resample(&losses, tau, &mut rng);

            let beta = if self.use_gradients && self.cfg.beta_mode != BetaMode::Identity {
                let grads: Vec<Vec<f64>> = region.iter().map(|s| s.gradient.clone()).collect();
                let gm = GradientMatrix::new(&grads, vec![0.0; self.dim], sigma)?;
                let (v, lambda) = eigendecompose(&covariance(&gm))?;
                Some(bias_matrix(&v, &lambda, self.cfg.epsilon, self.cfg.beta_mode)?)
            } else {
                None
            };

            let old = &self.particles[r];
            let moved: Vec<Vec<f64>> = picks
                .iter()
                .enumerate()
                .map(|(i, &src)| {
                    let mut rng = substream(self.seed, &[tag::NOISE, t as u64, r as u64, i as u64]);
                    let eta: Vec<f64> = (0..self.dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();
                    let step = match &beta {
                        Some(b) => (b * DVector::from_vec(eta)).data.into(),
                        None => eta,
                    };
                    old[src].iter().zip(step).map(|(x, d)| (x + d).clamp(0.0, 1.0)).collect()
                })
                .collect();
            self.particles[r] = moved;
        }
        Ok(evaluated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temperature_schedule() {
        assert_eq!(anneal_temperature(3.0, 0, 10), 1.0);
        assert_eq!(anneal_temperature(1.0, 10, 10), 0.5);
        for tau0 in [0.1, 1.0, 10.0] {
            let v: Vec<f64> = (0..=20).map(|t| anneal_temperature(tau0, t, 20)).collect();
            assert!(v.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn softmax_probabilities() {
        let p = resample_probabilities(&[0.0, 2f64.ln() * 0.7], 0.7);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12 && (p[1] - 1.0 / 3.0).abs() < 1e-12);
        // shift invariance lets huge losses through
        let p = resample_probabilities(&[1e6, 1e6 + 1.0], 1.0);
        assert!((p[0] - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn zero_temperature_picks_best() {
        let mut rng = substream(3, &[]);
        let idx = resample(&[0.5, 0.1, 0.9, 0.3], 1e-9, &mut rng);
        assert!(idx.iter().all(|&i| i == 1));
    }

    #[test]
    fn beta_columns_have_normalized_eigenvalue_norms() {
        let a = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let c = a.transpose() * &a;
        let (v, l) = eigendecompose(&c).unwrap();
        let b = bias_matrix(&v, &l, 1e-8, BetaMode::TraceNormalized).unwrap();
        let tr: f64 = l.iter().sum();
        for k in 0..6 {
            assert!((b.column(k).norm() - l[k] / (tr + 1e-8)).abs() < 1e-12);
        }
        let z = bias_matrix(&v, &[0.0; 6], 1e-8, BetaMode::TraceNormalized).unwrap();
        assert_eq!(z.amax(), 0.0);
    }
}
