//! First-order methods: independent chains, one gradient call each per
//! iteration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{uniform_point, Evaluated, Optimizer};
use crate::codesign::Objective;
use crate::error::{Error, Result};
use crate::rng::{substream, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub chains: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { chains: 8, learning_rate: 0.01, momentum: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub chains: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { chains: 8, learning_rate: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

fn init_chains(chains: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..chains).map(|c| uniform_point(dim, &mut substream(seed, &[tag::INIT, c as u64]))).collect()
}

fn evaluate(obj: &dyn Objective, xs: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
    xs.par_iter()
        .map(|x| {
            let s = obj.value_and_gradient(x);
            // a failed rollout carries no usable slope
            let g = if s.failed || s.gradient.iter().any(|v| !v.is_finite()) { vec![0.0; x.len()] } else { s.gradient };
            (s.loss, g)
        })
        .collect()
}

pub struct SgdMomentum {
    cfg: SgdConfig,
    x: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl SgdMomentum {
    pub fn new(cfg: SgdConfig, dim: usize, seed: u64) -> Result<Self> {
        if cfg.chains == 0 || !(cfg.learning_rate >= 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
            return Err(Error::Config("sgd needs chains >= 1, learning_rate >= 0, momentum in [0, 1)".into()));
        }
        Ok(Self { x: init_chains(cfg.chains, dim, seed), v: vec![vec![0.0; dim]; cfg.chains], cfg })
    }
}

impl Optimizer for SgdMomentum {
    fn name(&self) -> &str {
        "sgd"
    }

    fn evals_per_iteration(&self) -> usize {
        self.cfg.chains
    }

    fn step(&mut self, obj: &dyn Objective, _t: usize) -> Result<Vec<Evaluated>> {
        let res = evaluate(obj, &self.x);
        let out = self.x.iter().zip(&res).map(|(x, (l, _))| (x.clone(), *l)).collect();
        for ((x, v), (_, g)) in self.x.iter_mut().zip(&mut self.v).zip(&res) {
            for d in 0..x.len() {
                v[d] = self.cfg.momentum * v[d] - self.cfg.learning_rate * g[d];
                x[d] = (x[d] + v[d]).clamp(0.0, 1.0);
            }
        }
        Ok(out)
    }
}

pub struct Adam {
    cfg: AdamConfig,
    x: Vec<Vec<f64>>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, dim: usize, seed: u64) -> Result<Self> {
        if cfg.chains == 0
            || !(cfg.learning_rate >= 0.0)
            || !(0.0..1.0).contains(&cfg.beta1)
            || !(0.0..1.0).contains(&cfg.beta2)
            || !(cfg.epsilon > 0.0)
        {
            return Err(Error::Config("adam needs chains >= 1, learning_rate >= 0, betas in [0, 1), epsilon > 0".into()));
        }
        let zeros = vec![vec![0.0; dim]; cfg.chains];
        Ok(Self { x: init_chains(cfg.chains, dim, seed), m: zeros.clone(), v: zeros, cfg, t: 0 })
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &str {
        "adam"
    }

    fn evals_per_iteration(&self) -> usize {
        self.cfg.chains
    }

    fn step(&mut self, obj: &dyn Objective, _t: usize) -> Result<Vec<Evaluated>> {
        let res = evaluate(obj, &self.x);
        let out = self.x.iter().zip(&res).map(|(x, (l, _))| (x.clone(), *l)).collect();
        self.t += 1;
        let c = &self.cfg;
        let (b1t, b2t) = (1.0 - c.beta1.powi(self.t), 1.0 - c.beta2.powi(self.t));
        for (k, (_, g)) in res.iter().enumerate() {
            let (x, m, v) = (&mut self.x[k], &mut self.m[k], &mut self.v[k]);
            for d in 0..x.len() {
                m[d] = c.beta1 * m[d] + (1.0 - c.beta1) * g[d];
                v[d] = c.beta2 * v[d] + (1.0 - c.beta2) * g[d] * g[d];
                let step = c.learning_rate * (m[d] / b1t) / ((v[d] / b2t).sqrt() + c.epsilon);
                x[d] = (x[d] - step).clamp(0.0, 1.0);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::Bowl;
    use super::super::run;
    use super::*;

    #[test]
    fn both_converge_on_a_bowl() {
        let bowl = Bowl { dim: 5, center: 0.4 };
        let mut sgd = SgdMomentum::new(SgdConfig { chains: 2, learning_rate: 0.05, momentum: 0.5 }, 5, 1).unwrap();
        let rec = run(&mut sgd, &bowl, 200, None, 1, serde_json::Value::Null, false).unwrap();
        assert!(rec.best_loss < 1e-10, "{}", rec.best_loss);
        let mut adam = Adam::new(AdamConfig { chains: 2, learning_rate: 0.02, ..AdamConfig::default() }, 5, 1).unwrap();
        let rec = run(&mut adam, &bowl, 400, None, 1, serde_json::Value::Null, false).unwrap();
        assert!(rec.best_loss < 1e-4, "{}", rec.best_loss);
    }

    #[test]
    fn first_adam_step_is_learning_rate_sized() {
        // bias correction makes the first step ±lr per coordinate
        let bowl = Bowl { dim: 3, center: 0.0 };
        let mut adam = Adam::new(AdamConfig { chains: 1, learning_rate: 0.01, ..AdamConfig::default() }, 3, 4).unwrap();
        let x0 = adam.x[0].clone();
        adam.step(&bowl, 0).unwrap();
        for (a, b) in x0.iter().zip(&adam.x[0]) {
            assert!((a - b - 0.01).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rate_or_zero_gradient_keeps_x() {
        let bowl = Bowl { dim: 3, center: 0.5 };
        let mut sgd = SgdMomentum::new(SgdConfig { learning_rate: 0.0, ..SgdConfig::default() }, 3, 2).unwrap();
        let x0 = sgd.x.clone();
        for t in 0..5 {
            sgd.step(&bowl, t).unwrap();
        }
        assert_eq!(sgd.x, x0);
        let mut adam = Adam::new(AdamConfig::default(), 3, 2).unwrap();
        adam.x = vec![vec![0.5; 3]; adam.x.len()];
        let x0 = adam.x.clone();
        for t in 0..5 {
            adam.step(&bowl, t).unwrap();
        }
        assert_eq!(adam.x, x0);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(SgdMomentum::new(SgdConfig { momentum: 1.0, ..SgdConfig::default() }, 2, 0).is_err());
        assert!(Adam::new(AdamConfig { chains: 0, ..AdamConfig::default() }, 2, 0).is_err());
    }
}
