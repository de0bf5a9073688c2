//! Gradient-covariance PFO against plain PFO on a shortened Loc84.

use codesign_lab::codesign::{BoxView, Objective};
use codesign_lab::optimizers::{run, AlgorithmConfig, PfoConfig};
use codesign_lab::tasks::TaskSpec;

fn main() -> codesign_lab::error::Result<()> {
    let task = TaskSpec::builtin("Loc84")?.with_horizon(300).build(0)?;
    let obj = BoxView::new(task.as_ref());
    let iterations = 15;
    let base = PfoConfig { regions: 3, particles: 20, iterations, ..PfoConfig::default() };
    let algs = [
        ("gcpfo", AlgorithmConfig::Gcpfo(PfoConfig { sigma: 2.0, ..base.clone() })),
        ("pfo", AlgorithmConfig::Pfo(PfoConfig { sigma: 0.1, ..base })),
    ];
    for (label, alg) in algs {
        let mut opt = alg.build(obj.dim(), 7)?;
        let rec = run(opt.as_mut(), &obj, iterations, None, 7, alg.to_json(), false)?;
        let curve = rec.best_curve();
        println!("{label:>6}: start {:+.4}  end {:+.4}  ({} evaluations)", curve[0], rec.best_loss, rec.evaluations());
    }
    Ok(())
}
