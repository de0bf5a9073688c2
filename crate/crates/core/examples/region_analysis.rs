//! Gradient-covariance spectrum of one Loc84 region.

use codesign_lab::landscape::analyze_region;
use codesign_lab::rng::substream;
use codesign_lab::tasks::build_task;

fn main() -> codesign_lab::error::Result<()> {
    let task = build_task("Loc84", 0)?;
    let center = task.space().baseline_box();
    let mut rng = substream(1, &[]);
    let s = analyze_region(task.as_ref(), &center, 0.05, 100, &mut rng)?;
    println!("samples {} (failed {}), best loss {:.4}", s.n, s.failed, s.best_loss);
    for k in [1, 2, 5, 9, 20] {
        println!("top {k:>2} directions explain {:.3}", s.explained_at(k));
    }
    println!("effective dimensionality {:.2}", s.effective_dimensionality);
    println!("variance share: morphology {:.3}, control {:.3}", s.align_m, s.align_c);
    Ok(())
}
