//! Compares adjoint gradients with central differences on a short rollout.

use codesign_lab::codesign::{BoxView, Objective};
use codesign_lab::sim::finite_difference_gradient;
use codesign_lab::tasks::TaskSpec;

fn main() -> codesign_lab::error::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "Loc84".into());
    let task = TaskSpec::builtin(&name)?.with_horizon(200).build(0)?;
    let obj = BoxView::new(task.as_ref());
    let z: Vec<f64> = (0..obj.dim()).map(|i| 0.3 + 0.4 * ((i * 37 % 11) as f64 / 10.0)).collect();
    let adjoint = obj.value_and_gradient(&z).gradient;
    let fd = finite_difference_gradient(|p| Ok(obj.value(p).loss), &z, 1e-5)?;
    let mut worst: f64 = 0.0;
    for (i, (a, b)) in adjoint.iter().zip(&fd).enumerate() {
        let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
        worst = worst.max(rel);
        if i < 8 {
            println!("x{i:<3} adjoint {a:+.6e}  fd {b:+.6e}  rel {rel:.1e}");
        }
    }
    println!("{name}: worst relative error over {} components {worst:.1e}", adjoint.len());
    Ok(())
}
