//! A 2-D slice of Loc84 around the baseline, written as a heatmap SVG.

use codesign_lab::bench::svg::heatmap;
use codesign_lab::codesign::BoxView;
use codesign_lab::landscape::slice_grid;
use codesign_lab::tasks::build_task;

fn main() -> codesign_lab::error::Result<()> {
    let task = build_task("Loc84", 0)?;
    let m = task.space().m;
    let center = task.space().baseline_box();
    // one morphology and one control coordinate
    let (mut a, mut b) = (vec![0.0; m], vec![0.0; m]);
    a[0] = 1.0;
    b[m - 1] = 1.0;
    let grid = slice_grid(&BoxView::new(task.as_ref()), &center, &a, &b, 0.25, 21)?;
    let n = grid.resolution();
    for i in (0..n).step_by(4) {
        let row: Vec<String> = (0..n).step_by(4).map(|j| format!("{:+7.3}", grid.at(i, j))).collect();
        println!("α {:+.3}: {}", grid.alphas[i], row.join(" "));
    }
    println!("min {:.4}, max {:.4}", grid.min(), grid.max());
    let path = std::env::temp_dir().join("loc84_slice.svg");
    std::fs::write(&path, heatmap(&grid, "Loc84 slice", &[]))?;
    println!("wrote {}", path.display());
    Ok(())
}
