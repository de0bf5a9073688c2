//! Repeated runs from fresh initializations under a global evaluation budget.

use serde::{Deserialize, Serialize};

use super::{AlgorithmConfig, RunRecord};
use crate::codesign::Objective;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, tag};

/// A restart ends once this many consecutive restart-local best losses are
/// identical.
pub const STAGNATION_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestartConfig {
    pub eval_budget: usize,
    pub max_iterations: usize,
    pub stagnation_window: usize,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self { eval_budget: 50_000, max_iterations: 250, stagnation_window: STAGNATION_WINDOW }
    }
}

/// Runs `algorithm` again and again until the budget is spent.
///
/// Restart `r` is seeded from `(seed, RESTART, r)`. No iteration is started
/// that would overshoot the budget, and no restart is started that could
/// not complete one iteration. Iteration records carry the global running
/// best and the restart index.
pub fn restart_loop(algorithm: &AlgorithmConfig, obj: &dyn Objective, cfg: &RestartConfig, seed: u64, log_points: bool) -> Result<RunRecord> {
    if cfg.max_iterations == 0 || cfg.stagnation_window == 0 {
        return Err(Error::Config("restart loop needs max_iterations >= 1 and stagnation_window >= 1".into()));
    }
    let per = algorithm.evals_per_iteration();
    let config = serde_json::json!({ "algorithm": algorithm.to_json(), "restart": cfg });
    let mut rec = RunRecord::new(algorithm.name(), seed, config, log_points);
    let mut restart = 0;
    while rec.evaluations() + per <= cfg.eval_budget {
        let mut opt = algorithm.build(obj.dim(), derive_seed(seed, &[tag::RESTART, restart as u64]))?;
        let mut local: Vec<f64> = Vec::new();
        let mut reason = "iteration cap";
        for t in 0..cfg.max_iterations {
            if rec.evaluations() + per > cfg.eval_budget {
                reason = "budget";
                break;
            }
            let evaluated = opt.step(obj, t)?;
            let it_best = evaluated.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
            local.push(local.last().map_or(it_best, |&b: &f64| b.min(it_best)));
            rec.push(restart, &evaluated);
            let w = cfg.stagnation_window;
            if local.len() >= w && local[local.len() - w..].iter().all(|&b| b == local[local.len() - 1]) {
                reason = "stagnation";
                break;
            }
        }
        rec.events.push(format!("restart {restart}: {} iterations, ended by {reason}", local.len()));
        restart += 1;
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::super::testing::{Bowl, Counting};
    use super::super::{GaConfig, PfoConfig};
    use super::*;
    use crate::codesign::Sample;

    struct Constant;
    impl Objective for Constant {
        fn dim(&self) -> usize {
            3
        }
        fn value(&self, _: &[f64]) -> Sample {
            Sample { loss: 2.0, gradient: vec![0.0; 3], failed: false }
        }
        fn value_and_gradient(&self, z: &[f64]) -> Sample {
            self.value(z)
        }
    }

    #[test]
    fn stagnating_objective_restarts_every_window() {
        let alg = AlgorithmConfig::Ga(GaConfig { population: 4, ..GaConfig::default() });
        let cfg = RestartConfig { eval_budget: 4 * 35, ..RestartConfig::default() };
        let rec = restart_loop(&alg, &Constant, &cfg, 1, false).unwrap();
        let restarts: Vec<usize> = rec.iterations.iter().map(|it| it.restart).collect();
        assert_eq!(restarts.len(), 35);
        for r in 0..3 {
            assert_eq!(restarts.iter().filter(|&&x| x == r).count(), 10);
        }
        assert_eq!(restarts.iter().filter(|&&x| x == 3).count(), 5);
    }

    #[test]
    fn budget_is_never_exceeded() {
        let bowl = Bowl { dim: 4, center: 0.5 };
        let counted = Counting::new(&bowl);
        let alg = AlgorithmConfig::Pfo(PfoConfig { regions: 2, particles: 7, ..PfoConfig::default() });
        let cfg = RestartConfig { eval_budget: 100, max_iterations: 3, ..RestartConfig::default() };
        let rec = restart_loop(&alg, &counted, &cfg, 0, false).unwrap();
        assert_eq!(rec.evaluations(), 98);
        assert_eq!(counted.count(), 98);
        // 7 iterations of 14 evaluations: two full restarts and one partial
        assert_eq!(rec.iterations.last().unwrap().restart, 2);
        let tiny = RestartConfig { eval_budget: 13, ..cfg };
        assert!(restart_loop(&alg, &bowl, &tiny, 0, false).unwrap().iterations.is_empty());
    }

    #[test]
    fn merged_curve_is_running_minimum_of_segments() {
        let bowl = Bowl { dim: 5, center: 0.2 };
        let alg = AlgorithmConfig::Ga(GaConfig { population: 6, ..GaConfig::default() });
        let cfg = RestartConfig { eval_budget: 6 * 60, max_iterations: 15, ..RestartConfig::default() };
        let rec = restart_loop(&alg, &bowl, &cfg, 4, false).unwrap();
        let mut best = f64::INFINITY;
        for it in &rec.iterations {
            best = best.min(it.iteration_best_loss);
            assert_eq!(it.best_loss, best);
        }
        assert!(rec.iterations.iter().any(|it| it.restart > 0));
    }
}
