//! Genetic algorithm: truncation selection into an elite archive, uniform
//! crossover and Gaussian mutation.
//!
//! The archive holds the best `μ = ⌈elite_ratio · λ⌉` individuals seen so
//! far. Each generation breeds `λ` children from uniformly chosen archive
//! members, and the archive is then refilled from archive ∪ children. The
//! first iteration evaluates the random initial population.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{uniform_point, Evaluated, Optimizer};
use crate::codesign::Objective;
use crate::error::{Error, Result};
use crate::rng::{substream, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub elite_ratio: f64,
    /// Mutation standard deviation in box units.
    pub mutation_sigma: f64,
    /// Probability of taking each gene from the first parent.
    pub crossover_bias: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self { population: 16, elite_ratio: 0.25, mutation_sigma: 0.05, crossover_bias: 0.5 }
    }
}

pub struct Genetic {
    cfg: GaConfig,
    seed: u64,
    dim: usize,
    mu: usize,
    archive: Vec<Evaluated>,
}

impl Genetic {
    pub fn new(cfg: GaConfig, dim: usize, seed: u64) -> Result<Self> {
        if cfg.population < 4
            || !(cfg.elite_ratio > 0.0 && cfg.elite_ratio <= 1.0)
            || !(cfg.mutation_sigma >= 0.0)
            || !(0.0..=1.0).contains(&cfg.crossover_bias)
        {
            return Err(Error::Config("ga needs population >= 4, elite_ratio in (0, 1], mutation_sigma >= 0".into()));
        }
        let mu = ((cfg.population as f64 * cfg.elite_ratio).ceil() as usize).clamp(1, cfg.population);
        Ok(Self { cfg, seed, dim, mu, archive: Vec::new() })
    }

    /// Current elites, best first.
    pub fn elites(&self) -> &[Evaluated] {
        &self.archive
    }

    fn breed(&self, t: usize) -> Vec<Vec<f64>> {
        (0..self.cfg.population)
            .map(|k| {
                let mut rng = substream(self.seed, &[tag::POPULATION, t as u64, k as u64]);
                if self.archive.is_empty() {
                    return uniform_point(self.dim, &mut rng);
                }
                let a = &self.archive[rng.random_range(0..self.archive.len())].0;
                let b = &self.archive[rng.random_range(0..self.archive.len())].0;
                (0..self.dim)
                    .map(|d| {
                        let gene = if rng.random::<f64>() < self.cfg.crossover_bias { a[d] } else { b[d] };
                        let noise: f64 = rng.sample(StandardNormal);
                        (gene + self.cfg.mutation_sigma * noise).clamp(0.0, 1.0)
                    })
                    .collect()
            })
            .collect()
    }
}

impl Optimizer for Genetic {
    fn name(&self) -> &str {
        "ga"
    }

    fn evals_per_iteration(&self) -> usize {
        self.cfg.population
    }

    fn step(&mut self, obj: &dyn Objective, t: usize) -> Result<Vec<Evaluated>> {
        let children = self.breed(t);
        let losses: Vec<f64> = children.par_iter().map(|x| obj.value(x).loss).collect();
        let evaluated: Vec<Evaluated> = children.into_iter().zip(losses).collect();
        // stable sort keeps older members ahead on ties
        let mut pool: Vec<Evaluated> = self.archive.drain(..).chain(evaluated.iter().cloned()).collect();
        pool.sort_by(|a, b| a.1.total_cmp(&b.1));
        pool.truncate(self.mu);
        self.archive = pool;
        Ok(evaluated)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::Bowl;
    use super::*;

    #[test]
    fn elite_best_never_gets_worse() {
        let bowl = Bowl { dim: 10, center: 0.5 };
        let mut ga = Genetic::new(GaConfig::default(), 10, 5).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..100 {
            ga.step(&bowl, t).unwrap();
            let best = ga.elites()[0].1;
            assert!(best <= prev);
            prev = best;
        }
        assert!(prev < 0.05, "{prev}");
    }

    #[test]
    fn zero_mutation_on_identical_population_is_fixed() {
        let bowl = Bowl { dim: 4, center: 0.1 };
        let mut ga = Genetic::new(GaConfig { mutation_sigma: 0.0, ..GaConfig::default() }, 4, 1).unwrap();
        let x = vec![0.7; 4];
        let l = bowl.value(&x).loss;
        ga.archive = vec![(x.clone(), l); ga.mu];
        for t in 1..20 {
            for (child, _) in ga.step(&bowl, t).unwrap() {
                assert_eq!(child, x);
            }
        }
    }

    #[test]
    fn archive_size_follows_elite_ratio() {
        let bowl = Bowl { dim: 2, center: 0.5 };
        let mut ga = Genetic::new(GaConfig { population: 10, elite_ratio: 0.3, ..GaConfig::default() }, 2, 0).unwrap();
        ga.step(&bowl, 0).unwrap();
        assert_eq!(ga.elites().len(), 3);
    }
}
