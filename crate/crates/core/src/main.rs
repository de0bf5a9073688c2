use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use codesign_lab::bench::{self, ExperimentConfig};
use codesign_lab::error::{Error, Result};

#[derive(Parser)]
#[command(name = "codesign-lab", version, about = "Co-design landscape analysis and optimizer benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML, or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [env: CODESIGN_LAB_WORKERS].
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Full-size protocol constants (slow).
    #[arg(long, global = true)]
    paper_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed) cell of the config.
    Optimize,
    /// Gradient-covariance analysis of harvested regions.
    Analyze,
    /// Evaluate a 2-D slice of the landscape.
    Landscape {
        /// Task, when running without a config.
        #[arg(long)]
        task: Option<String>,
        /// Two parameter indices, e.g. `0,5`.
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<usize>>,
        /// Two eigenvector indices, e.g. `0,1`.
        #[arg(long, value_delimiter = ',')]
        eigenvectors: Option<Vec<usize>>,
        /// `regions.json` written by `analyze`.
        #[arg(long)]
        region_stats: Option<PathBuf>,
        #[arg(long)]
        region: Option<usize>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Restart-loop runs under per-algorithm evaluation budgets.
    BudgetStudy,
    /// Draw a trajectory CSV as SVG frames.
    Render {
        trajectory: PathBuf,
        /// Draw every n-th recorded frame.
        #[arg(long, default_value_t = 1)]
        frame_stride: usize,
    },
}

fn workers(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("CODESIGN_LAB_WORKERS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Error::Config(format!("CODESIGN_LAB_WORKERS: invalid count '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn pair(flag: &str, v: &[usize]) -> Result<[usize; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::InvalidArgument(format!("{flag} takes two comma-separated indices"))),
    }
}

fn load(common: &Common, task: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = match (&common.config, task) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(t)) => ExperimentConfig::for_task(t),
        (None, None) => return Err(Error::Config("--config is required".into())),
    };
    if let Some(t) = task {
        cfg.task = t.to_string();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.paper_scale {
        cfg.apply_paper_scale();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let c = &cli.common;
    match cli.command {
        Command::Optimize => {
            let cells = bench::optimize(&load(c, None)?, &c.out)?;
            eprintln!("optimize: {} runs written to {}", cells.len(), c.out.display());
        }
        Command::Analyze => {
            let regions = bench::analyze(&load(c, None)?, &c.out)?;
            eprintln!("analyze: {} regions written to {}", regions.len(), c.out.display());
        }
        Command::Landscape { task, axes, eigenvectors, region_stats, region, resolution } => {
            let mut cfg = load(c, task.as_deref())?;
            let l = &mut cfg.landscape;
            if let Some(a) = axes {
                l.axes = Some(pair("--axes", &a)?);
                l.eigenvectors = None;
            }
            if let Some(e) = eigenvectors {
                l.eigenvectors = Some(pair("--eigenvectors", &e)?);
                l.axes = None;
            }
            if region_stats.is_some() {
                l.region_stats = region_stats;
            }
            l.region = region.unwrap_or(l.region);
            l.resolution = resolution.unwrap_or(l.resolution);
            let grid = bench::landscape(&cfg, &c.out)?;
            eprintln!("landscape: {} points written to {}", grid.losses.len(), c.out.display());
        }
        Command::BudgetStudy => {
            let cells = bench::budget_study(&load(c, None)?, &c.out)?;
            eprintln!("budget-study: {} runs written to {}", cells.len(), c.out.display());
        }
        Command::Render { trajectory, frame_stride } => {
            let frames = bench::render(&trajectory, &c.out, frame_stride)?;
            eprintln!("render: {} frames written to {}", frames.len(), c.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match workers(cli.common.workers) {
        Ok(n) => {
            let mut b = rayon::ThreadPoolBuilder::new();
            if let Some(n) = n {
                b = b.num_threads(n.max(1));
            }
            b.build()
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
