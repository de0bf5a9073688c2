//! Experiment runner behind the `codesign-lab` binary: config files in,
//! CSV/JSON tables and SVG charts out.
//!
//! Outputs go to `<out>/<task>/<label>/seed<k>/` for runs, with summaries
//! and charts next to them. Every file starts with the command, master seed
//! and config snapshot, and contents do not depend on the worker count.

mod commands;
mod config;
mod output;
pub mod svg;

pub use commands::{
    analyze, budget_study, build_configured_task, landscape, load_records, optimize, region_centers, render, run_seed,
    slice_setup, Cell,
};
pub use config::{AlgorithmEntry, AnalysisConfig, BudgetConfig, Center, ExperimentConfig, LandscapeConfig};
pub use output::{read_csv, write_csv, write_json, write_text, Header};
