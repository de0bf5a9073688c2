//! Records a Loc155 rollout and draws it as SVG frames.

use codesign_lab::bench::render;
use codesign_lab::sim::write_trajectory_csv;
use codesign_lab::tasks::build_task;

fn main() -> codesign_lab::error::Result<()> {
    let task = build_task("Loc155", 0)?;
    let x = task.space().from_box(&task.space().baseline_box());
    let rec = task.record(&x, 50)?.expect("locomotion tasks record rollouts");
    let dir = std::env::temp_dir().join("loc155_frames");
    let csv = dir.join("trajectory.csv");
    std::fs::create_dir_all(&dir)?;
    write_trajectory_csv(&csv, &rec.trajectory, &rec.network, rec.ellipse_axes, &["Loc155 baseline".into()])?;
    let frames = render(&csv, &dir, 4)?;
    println!("{} frames in {}", frames.len(), dir.display());
    Ok(())
}
