//! CMA-ES on a 6-D Rosenbrock valley mapped into the unit box.

use codesign_lab::codesign::{BoxView, Task};
use codesign_lab::optimizers::{run, AlgorithmConfig, CmaesConfig};
use codesign_lab::tasks::AnalyticTask;

fn main() -> codesign_lab::error::Result<()> {
    let task = AnalyticTask::rosenbrock(6);
    let obj = BoxView::new(&task);
    let alg = AlgorithmConfig::Cmaes(CmaesConfig { population: 12, ..CmaesConfig::default() });
    let mut opt = alg.build(6, 3)?;
    let rec = run(opt.as_mut(), &obj, 400, None, 3, alg.to_json(), false)?;
    for it in rec.iterations.iter().step_by(50) {
        println!("iteration {:>3}  best {:.3e}", it.iteration, it.best_loss);
    }
    let x = task.space().from_box(&rec.best_x);
    let shown: Vec<String> = x.values.iter().map(|v| format!("{v:.4}")).collect();
    println!("best {:.3e} at [{}]", rec.best_loss, shown.join(", "));
    Ok(())
}
