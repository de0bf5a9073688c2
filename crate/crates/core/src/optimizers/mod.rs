//! Black-box and gradient-based optimizers over the unit box.
//!
//! Every optimizer works on an [`Objective`] in `[0, 1]^m` and advances in
//! iterations. [`run`] drives a fixed number of iterations (or an evaluation
//! budget) and logs a [`RunRecord`]; [`restart_loop`] adds restarts on
//! stagnation.

mod cmaes;
mod ga;
mod gradient;
mod pfo;
mod record;
mod restart;

use serde::{Deserialize, Serialize};

pub use cmaes::{CmaEs, CmaesConfig};
pub use ga::{Genetic, GaConfig};
pub use gradient::{Adam, AdamConfig, SgdConfig, SgdMomentum};
pub use pfo::{anneal_temperature, bias_matrix, resample, resample_probabilities, BetaMode, ParticleFilter, PfoConfig};
pub use record::{IterationRecord, PointRecord, RunRecord};
pub use restart::{restart_loop, RestartConfig, STAGNATION_WINDOW};

use crate::codesign::Objective;
use crate::error::{Error, Result};

/// A point and its loss.
pub type Evaluated = (Vec<f64>, f64);

pub trait Optimizer: Send {
    fn name(&self) -> &str;
    /// Objective calls made by one [`step`](Self::step).
    fn evals_per_iteration(&self) -> usize;
    /// Runs iteration `t` and returns every point evaluated in it.
    fn step(&mut self, obj: &dyn Objective, t: usize) -> Result<Vec<Evaluated>>;
}

/// Optimizer choice plus hyperparameters, as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum AlgorithmConfig {
    Gcpfo(PfoConfig),
    Pfo(PfoConfig),
    Sgd(SgdConfig),
    Adam(AdamConfig),
    Cmaes(CmaesConfig),
    Ga(GaConfig),
}

pub const ALGORITHM_NAMES: [&str; 6] = ["gcpfo", "pfo", "sgd", "adam", "cmaes", "ga"];

impl AlgorithmConfig {
    /// Default hyperparameters for a named algorithm.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "gcpfo" => Self::Gcpfo(PfoConfig::default()),
            "pfo" => Self::Pfo(PfoConfig { beta_mode: BetaMode::Identity, ..PfoConfig::default() }),
            "sgd" => Self::Sgd(SgdConfig::default()),
            "adam" => Self::Adam(AdamConfig::default()),
            "cmaes" => Self::Cmaes(CmaesConfig::default()),
            "ga" => Self::Ga(GaConfig::default()),
            other => return Err(Error::Config(format!("unknown algorithm '{other}' (expected one of {ALGORITHM_NAMES:?})"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gcpfo(_) => "gcpfo",
            Self::Pfo(_) => "pfo",
            Self::Sgd(_) => "sgd",
            Self::Adam(_) => "adam",
            Self::Cmaes(_) => "cmaes",
            Self::Ga(_) => "ga",
        }
    }

    pub fn evals_per_iteration(&self) -> usize {
        match self {
            Self::Gcpfo(c) | Self::Pfo(c) => c.regions * c.particles,
            Self::Sgd(c) => c.chains,
            Self::Adam(c) => c.chains,
            Self::Cmaes(c) => c.population,
            Self::Ga(c) => c.population,
        }
    }

    pub fn build(&self, dim: usize, seed: u64) -> Result<Box<dyn Optimizer>> {
        Ok(match self {
            Self::Gcpfo(c) => Box::new(ParticleFilter::gcpfo(c.clone(), dim, seed)?),
            Self::Pfo(c) => Box::new(ParticleFilter::pfo(c.clone(), dim, seed)?),
            Self::Sgd(c) => Box::new(SgdMomentum::new(c.clone(), dim, seed)?),
            Self::Adam(c) => Box::new(Adam::new(c.clone(), dim, seed)?),
            Self::Cmaes(c) => Box::new(CmaEs::new(c.clone(), dim, seed)?),
            Self::Ga(c) => Box::new(Genetic::new(c.clone(), dim, seed)?),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("algorithm config serializes")
    }
}

/// Runs `iterations` steps, stopping early before any step that would push
/// the evaluation count past `budget`.
pub fn run(
    opt: &mut dyn Optimizer,
    obj: &dyn Objective,
    iterations: usize,
    budget: Option<usize>,
    seed: u64,
    config: serde_json::Value,
    log_points: bool,
) -> Result<RunRecord> {
    let mut rec = RunRecord::new(opt.name(), seed, config, log_points);
    for t in 0..iterations {
        if budget.is_some_and(|b| rec.evaluations() + opt.evals_per_iteration() > b) {
            break;
        }
        let evaluated = opt.step(obj, t)?;
        rec.push(0, &evaluated);
    }
    Ok(rec)
}

/// Uniform point in the unit box.
pub(crate) fn uniform_point<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

#[cfg(test)]
pub(crate) mod testing {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use crate::codesign::{Objective, Sample};

    /// Objective wrapper that counts calls.
    pub struct Counting<'a, O: Objective> {
        pub inner: &'a O,
        pub calls: AtomicUsize,
    }

    impl<'a, O: Objective> Counting<'a, O> {
        pub fn new(inner: &'a O) -> Self {
            Self { inner, calls: AtomicUsize::new(0) }
        }
        pub fn count(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    impl<O: Objective> Objective for Counting<'_, O> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn value(&self, z: &[f64]) -> Sample {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.value(z)
        }
        fn value_and_gradient(&self, z: &[f64]) -> Sample {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.value_and_gradient(z)
        }
    }

    /// `Σ (z_i − c)²`
    pub struct Bowl {
        pub dim: usize,
        pub center: f64,
    }

    impl Objective for Bowl {
        fn dim(&self) -> usize {
            self.dim
        }
        fn value(&self, z: &[f64]) -> Sample {
            Sample { loss: z.iter().map(|x| (x - self.center).powi(2)).sum(), gradient: Vec::new(), failed: false }
        }
        fn value_and_gradient(&self, z: &[f64]) -> Sample {
            let mut s = self.value(z);
            s.gradient = z.iter().map(|x| 2.0 * (x - self.center)).collect();
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    #[test]
    fn evaluation_count_matches_calls() {
        let bowl = Bowl { dim: 5, center: 0.3 };
        for name in ALGORITHM_NAMES {
            let cfg = AlgorithmConfig::default_for(name).unwrap();
            let obj = Counting::new(&bowl);
            let mut opt = cfg.build(5, 11).unwrap();
            let rec = run(opt.as_mut(), &obj, 6, None, 11, cfg.to_json(), false).unwrap();
            assert_eq!(rec.evaluations(), obj.count(), "{name}");
            assert_eq!(rec.evaluations(), 6 * cfg.evals_per_iteration(), "{name}");
        }
    }

    #[test]
    fn points_stay_in_box() {
        let bowl = Bowl { dim: 4, center: 1.5 };
        for name in ALGORITHM_NAMES {
            let cfg = AlgorithmConfig::default_for(name).unwrap();
            let mut opt = cfg.build(4, 2).unwrap();
            let rec = run(opt.as_mut(), &bowl, 8, None, 2, cfg.to_json(), true).unwrap();
            for p in rec.points.unwrap() {
                assert!(p.x.iter().all(|v| (0.0..=1.0).contains(v)), "{name}");
            }
        }
    }

    #[test]
    fn budget_stops_before_overshoot() {
        let bowl = Bowl { dim: 3, center: 0.5 };
        let cfg = AlgorithmConfig::default_for("ga").unwrap();
        let mut opt = cfg.build(3, 0).unwrap();
        let per = cfg.evals_per_iteration();
        let rec = run(opt.as_mut(), &bowl, 1000, Some(per * 3 + 1), 0, cfg.to_json(), false).unwrap();
        assert_eq!(rec.evaluations(), per * 3);
    }

    #[test]
    fn runs_are_reproducible() {
        let bowl = Bowl { dim: 6, center: 0.2 };
        for name in ALGORITHM_NAMES {
            let cfg = AlgorithmConfig::default_for(name).unwrap();
            let a = run(cfg.build(6, 9).unwrap().as_mut(), &bowl, 5, None, 9, cfg.to_json(), true).unwrap();
            let b = run(cfg.build(6, 9).unwrap().as_mut(), &bowl, 5, None, 9, cfg.to_json(), true).unwrap();
            assert_eq!(a, b, "{name}");
        }
    }

    #[test]
    fn config_round_trip() {
        for name in ALGORITHM_NAMES {
            let cfg = AlgorithmConfig::default_for(name).unwrap();
            let back: AlgorithmConfig = serde_json::from_value(cfg.to_json()).unwrap();
            assert_eq!(cfg, back);
        }
        assert!(AlgorithmConfig::default_for("nelder_mead").is_err());
    }
}
