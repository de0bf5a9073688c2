//! Rolls out a random Loc84 design and prints how far its center of mass travels.
//! The baseline stands still because every actuator group shares one phase.

use rand::Rng;

use codesign_lab::rng::substream;
use codesign_lab::tasks::build_task;

fn main() -> codesign_lab::error::Result<()> {
    let task = build_task("Loc84", 0)?;
    let space = task.space();
    let base = space.from_box(&space.baseline_box());
    println!("{}: m = {}, baseline loss {:.4}", task.name(), space.m, task.evaluate(&base)?.loss);

    let mut rng = substream(5, &[]);
    let z: Vec<f64> = (0..space.m).map(|_| rng.random()).collect();
    let x = space.from_box(&z);
    println!("random design loss {:.4}", task.evaluate(&x)?.loss);

    let rec = task.record(&x, 64)?.expect("locomotion tasks record rollouts");
    let mass: Vec<f64> = rec.network.nodes.iter().map(|n| n.mass).collect();
    let total: f64 = mass.iter().sum();
    for f in &rec.trajectory.frames {
        let com: f64 = f.positions.iter().zip(&mass).map(|(p, m)| p[0] * m).sum::<f64>() / total;
        println!("step {:>5}  com_x {:+.4}", f.step, com);
    }
    Ok(())
}
