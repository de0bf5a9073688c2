//! Loads an experiment config and runs the optimize and analyze commands from the library.

use std::path::PathBuf;

use codesign_lab::bench::{analyze, optimize, ExperimentConfig};

fn main() -> codesign_lab::error::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/quick.toml"));
    let cfg = ExperimentConfig::load(&path)?;
    let out = std::env::temp_dir().join("codesign_lab_quick");
    for cell in optimize(&cfg, &out)? {
        println!("{:>8} seed {}  best {:+.4}", cell.label, cell.seed_index, cell.record.best_loss);
    }
    let regions = analyze(&cfg, &out)?;
    let mean_ed = regions.iter().map(|r| r.effective_dimensionality).sum::<f64>() / regions.len() as f64;
    println!("{} regions, mean effective dimensionality {mean_ed:.2}", regions.len());
    println!("outputs in {}", out.display());
    Ok(())
}
