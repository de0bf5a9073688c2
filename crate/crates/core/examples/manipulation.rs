//! The Mani212 gripper rotating its ellipse, with the gradient split by parameter kind.

use codesign_lab::codesign::ParamKind;
use codesign_lab::tasks::build_task;

fn main() -> codesign_lab::error::Result<()> {
    let task = build_task("Mani212", 0)?;
    let space = task.space();
    let x = space.from_box(&space.baseline_box());
    let e = task.evaluate_with_gradient(&x)?;
    let g = e.gradient.expect("gradient requested");
    let norm = |kind: ParamKind| {
        g.iter().zip(&space.labels).filter(|(_, k)| **k == kind).map(|(v, _)| v * v).sum::<f64>().sqrt()
    };
    println!("{}: baseline loss {:.4}", task.name(), e.loss);
    println!("|∇ morphology| {:.4e}, |∇ control| {:.4e}", norm(ParamKind::Morphology), norm(ParamKind::Control));

    let rec = task.record(&x, 100)?.expect("manipulation tasks record rollouts");
    for f in &rec.trajectory.frames {
        if let Some((c, angle)) = f.ellipse {
            println!("step {:>5}  ellipse at ({:+.3}, {:+.3}) angle {:+.3} rad", f.step, c[0], c[1], angle);
        }
    }
    Ok(())
}
