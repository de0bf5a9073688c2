//! The restart loop under a fixed evaluation budget.

use codesign_lab::codesign::BoxView;
use codesign_lab::optimizers::{restart_loop, AlgorithmConfig, GaConfig, RestartConfig};
use codesign_lab::tasks::AnalyticTask;

fn main() -> codesign_lab::error::Result<()> {
    let task = AnalyticTask::rosenbrock(8);
    let obj = BoxView::new(&task);
    let alg = AlgorithmConfig::Ga(GaConfig::default());
    let rc = RestartConfig { eval_budget: 5000, max_iterations: 80, ..RestartConfig::default() };
    let rec = restart_loop(&alg, &obj, &rc, 11, false)?;
    for e in &rec.events {
        println!("{e}");
    }
    println!("{} evaluations of {}, best {:.4e}", rec.evaluations(), rc.eval_budget, rec.best_loss);
    Ok(())
}
