use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use super::config::{AlgorithmEntry, Center, ExperimentConfig};
use super::output::{write_csv, write_json, write_text, Header};
use super::svg::{heatmap, trajectory_frame, Chart, ChartKind, Viewport};
use crate::codesign::{BoxView, Objective, TaskHandle};
use crate::error::{Error, Result};
use crate::landscape::{analyze_region, harvest_regions, slice_grid, HarvestedRegion, RegionStats, SliceGrid};
use crate::optimizers::{restart_loop, run, RestartConfig, RunRecord};
use crate::rng::{derive_seed, substream, tag};
use crate::sim::{read_trajectory_csv, write_trajectory_csv};
use crate::tasks::{build_task, TaskSpec};

/// Builds the configured task, honoring the horizon override.
pub fn build_configured_task(cfg: &ExperimentConfig) -> Result<TaskHandle> {
    match cfg.horizon {
        Some(h) => TaskSpec::resolve(&cfg.task)?.with_horizon(h).build(cfg.seed),
        None => build_task(&cfg.task, cfg.seed),
    }
}

/// Seed of run `k`, derived from the master seed.
pub fn run_seed(master: u64, k: usize) -> u64 {
    derive_seed(master, &[tag::SEED, k as u64])
}

fn f(v: f64) -> String {
    v.to_string()
}

fn stats(values: &[f64]) -> serde_json::Value {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
    json!({
        "mean": values.iter().sum::<f64>() / n as f64,
        "median": median,
        "min": s[0],
        "max": s[n - 1],
    })
}

fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// One optimizer run plus its cell coordinates.
#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub seed_index: usize,
    pub record: RunRecord,
}

fn cells(cfg: &ExperimentConfig) -> Vec<(&AlgorithmEntry, usize)> {
    cfg.algorithms.iter().flat_map(|a| (0..cfg.seeds).map(move |k| (a, k))).collect()
}

fn run_cell(cfg: &ExperimentConfig, obj: &dyn Objective, entry: &AlgorithmEntry, k: usize) -> Result<Cell> {
    let seed = run_seed(cfg.seed, k);
    let mut opt = entry.config.build(obj.dim(), seed)?;
    let config = serde_json::to_value(entry).expect("entry serializes");
    let record = run(opt.as_mut(), obj, cfg.iterations, None, seed, config, cfg.log_points)?;
    Ok(Cell { label: entry.label().to_string(), seed_index: k, record })
}

fn write_run(dir: &Path, header: &Header, task: &TaskHandle, cell: &Cell, trajectory_stride: usize) -> Result<()> {
    let rec = &cell.record;
    write_csv(
        &dir.join("run.csv"),
        header,
        &["iteration", "restart", "evaluations", "best_loss", "iteration_best_loss"],
        rec.iterations.iter().map(|it| {
            vec![it.iteration.to_string(), it.restart.to_string(), it.evaluations.to_string(), f(it.best_loss), f(it.iteration_best_loss)]
        }),
    )?;
    if let Some(points) = &rec.points {
        let m = task.space().m;
        let mut cols = vec!["evaluation".to_string(), "loss".to_string()];
        cols.extend((0..m).map(|i| format!("x{i}")));
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        write_csv(
            &dir.join("points.csv"),
            header,
            &cols,
            points.iter().map(|p| {
                let mut r = vec![p.evaluation.to_string(), f(p.loss)];
                r.extend(p.x.iter().map(|v| f(*v)));
                r
            }),
        )?;
    }
    let mut slim = rec.clone();
    slim.points = None;
    write_json(&dir.join("record.json"), header, json!({ "record": slim, "seed_index": cell.seed_index }))?;
    let best = task.space().from_box(&rec.best_x);
    write_json(
        &dir.join("best.json"),
        header,
        json!({ "best_loss": rec.best_loss, "best_box": rec.best_x, "best_parameters": best.values }),
    )?;
    if trajectory_stride > 0 {
        if let Some(r) = task.record(&best, trajectory_stride)? {
            write_trajectory_csv(&dir.join("best_trajectory.csv"), &r.trajectory, &r.network, r.ellipse_axes, &header.lines())?;
        }
    }
    Ok(())
}

fn task_dir(out: &Path, task: &TaskHandle) -> PathBuf {
    out.join(task.name())
}

/// Runs every (algorithm, seed) cell and writes per-run files, a summary and
/// a mean best-loss chart. Returns the cells in config order.
pub fn optimize(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Cell>> {
    if cfg.algorithms.is_empty() {
        return Err(Error::Config("optimize needs at least one [[algorithms]] entry".into()));
    }
    let task = build_configured_task(cfg)?;
    let obj = BoxView::new(task.as_ref());
    let header = Header::new("optimize", cfg.seed, cfg.snapshot());
    let root = task_dir(out, &task);
    let results: Vec<Result<Cell>> = cells(cfg)
        .into_par_iter()
        .map(|(entry, k)| {
            let cell = run_cell(cfg, &obj, entry, k)?;
            write_run(&root.join(&cell.label).join(format!("seed{k}")), &header, &task, &cell, cfg.trajectory_stride)?;
            Ok(cell)
        })
        .collect();
    let cells = first_error(results)?;

    let mut summary = Vec::new();
    let mut chart = Chart::new(&format!("{}: mean best loss", task.name()), "iteration", "best loss", ChartKind::Line);
    for entry in &cfg.algorithms {
        let mine: Vec<&Cell> = cells.iter().filter(|c| c.label == entry.label()).collect();
        let finals: Vec<f64> = mine.iter().map(|c| c.record.best_loss).collect();
        let mut s = stats(&finals);
        s["label"] = json!(entry.label());
        s["algorithm"] = entry.config.to_json();
        s["evaluations_per_iteration"] = json!(entry.config.evals_per_iteration());
        s["final_best_loss"] = json!(finals);
        summary.push(s);
        let len = mine.iter().map(|c| c.record.iterations.len()).min().unwrap_or(0);
        let mean: Vec<(f64, f64)> = (0..len)
            .map(|i| (i as f64, mine.iter().map(|c| c.record.iterations[i].best_loss).sum::<f64>() / mine.len() as f64))
            .collect();
        chart = chart.with_series(entry.label(), mean);
    }
    write_json(&root.join("summary.json"), &header, json!({ "task": task.name(), "algorithms": summary }))?;
    write_text(&root.join("best_loss.svg"), &chart.render(&header.lines()))?;
    Ok(cells)
}

/// Every `record.json` under `<dir>/<task>/<label>/seed<k>/`, in path order.
pub fn load_records(dir: &Path, task: &str) -> Result<Vec<RunRecord>> {
    let root = dir.join(task);
    let mut paths = Vec::new();
    let mut labels: Vec<PathBuf> = fs::read_dir(&root)
        .map_err(|e| Error::Config(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    labels.sort();
    for l in labels {
        let mut seeds: Vec<PathBuf> = fs::read_dir(&l)?.filter_map(|e| e.ok().map(|e| e.path().join("record.json"))).filter(|p| p.is_file()).collect();
        seeds.sort();
        paths.extend(seeds);
    }
    if paths.is_empty() {
        return Err(Error::Config(format!("no run records under {}", root.display())));
    }
    paths
        .iter()
        .map(|p| {
            let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p)?)?;
            serde_json::from_value(v["record"].clone()).map_err(|e| Error::Malformed { path: p.clone(), message: e.to_string() })
        })
        .collect()
}

/// Region centers: harvested from stored runs, from fresh runs of the
/// configured algorithms, or drawn uniformly.
pub fn region_centers(cfg: &ExperimentConfig, task: &TaskHandle) -> Result<Vec<HarvestedRegion>> {
    let an = &cfg.analysis;
    let records = if let Some(dir) = &an.records {
        load_records(dir, task.name())?
    } else if !cfg.algorithms.is_empty() {
        let obj = BoxView::new(task.as_ref());
        let results: Vec<Result<Cell>> = cells(cfg).into_par_iter().map(|(e, k)| run_cell(cfg, &obj, e, k)).collect();
        first_error(results)?.into_iter().map(|c| c.record).collect()
    } else {
        let m = task.space().m;
        return Ok((0..an.regions)
            .map(|k| {
                let mut rng = substream(cfg.seed, &[tag::HARVEST, k as u64]);
                let point: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                HarvestedRegion { record: 0, iteration: 0, loss: f64::NAN, point }
            })
            .collect());
    };
    harvest_regions(&records, an.regions, an.stride)
}

/// Harvests regions, analyzes each and writes spectrum, ED and alignment
/// tables with charts.
pub fn analyze(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RegionStats>> {
    let task = build_configured_task(cfg)?;
    let header = Header::new("analyze", cfg.seed, cfg.snapshot());
    let centers = region_centers(cfg, &task)?;
    let an = &cfg.analysis;
    let mut all = Vec::with_capacity(centers.len());
    for (k, c) in centers.iter().enumerate() {
        let mut rng = substream(cfg.seed, &[tag::REGION, k as u64]);
        all.push(analyze_region(task.as_ref(), &c.point, an.sigma, an.samples, &mut rng)?);
    }
    let dir = task_dir(out, &task).join("analysis");
    let m = task.space().m;
    write_csv(
        &dir.join("eigenspectrum.csv"),
        &header,
        &["region_id", "k", "cumulative_explained"],
        all.iter().enumerate().flat_map(|(r, s)| (1..=m).map(move |k| vec![r.to_string(), k.to_string(), f(s.explained_at(k))])),
    )?;
    write_csv(
        &dir.join("ed.csv"),
        &header,
        &["region_id", "best_loss", "ed"],
        all.iter().enumerate().map(|(r, s)| vec![r.to_string(), f(s.best_loss), f(s.effective_dimensionality)]),
    )?;
    write_csv(
        &dir.join("alignment.csv"),
        &header,
        &["region_id", "best_loss", "align_m", "align_c"],
        all.iter().enumerate().map(|(r, s)| vec![r.to_string(), f(s.best_loss), f(s.align_m), f(s.align_c)]),
    )?;
    let regions: Vec<serde_json::Value> = all
        .iter()
        .zip(&centers)
        .enumerate()
        .map(|(r, (s, c))| {
            let mut v = s.to_json(an.full);
            v["region_id"] = json!(r);
            v["source"] = json!({ "record": c.record, "iteration": c.iteration, "loss": c.loss });
            v
        })
        .collect();
    write_json(&dir.join("regions.json"), &header, json!({ "task": task.name(), "regions": regions }))?;

    let lines = header.lines();
    let mut ev = Chart::new("cumulative explained variance", "k", "explained", ChartKind::Line);
    for s in &all {
        ev = ev.with_series("", (1..=m).map(|k| (k as f64, s.explained_at(k))).collect());
    }
    write_text(&dir.join("explained.svg"), &ev.render(&lines))?;
    let ed = Chart::new("effective dimensionality", "region best loss", "ED", ChartKind::Scatter)
        .with_series("ED", all.iter().map(|s| (s.best_loss, s.effective_dimensionality)).collect());
    write_text(&dir.join("ed.svg"), &ed.render(&lines))?;
    let al = Chart::new("alignment", "region best loss", "ratio", ChartKind::Scatter)
        .with_series("morphology", all.iter().map(|s| (s.best_loss, s.align_m)).collect())
        .with_series("control", all.iter().map(|s| (s.best_loss, s.align_c)).collect());
    write_text(&dir.join("alignment.svg"), &al.render(&lines))?;
    Ok(all)
}

fn read_region(path: &Path, region: usize) -> Result<serde_json::Value> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    v["regions"]
        .get(region)
        .cloned()
        .ok_or_else(|| Error::Malformed { path: path.to_path_buf(), message: format!("no region {region}") })
}

/// Slice center and the two directions from the landscape options.
pub fn slice_setup(cfg: &ExperimentConfig, task: &TaskHandle) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let l = &cfg.landscape;
    let m = task.space().m;
    let region = match &l.region_stats {
        Some(p) => Some(read_region(p, l.region)?),
        None => None,
    };
    let unit = |i: usize| -> Result<Vec<f64>> {
        if i >= m {
            return Err(Error::InvalidArgument(format!("axis {i} out of range for m = {m}")));
        }
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        Ok(e)
    };
    let (a, b) = match (l.axes, l.eigenvectors) {
        (Some([i, j]), None) => {
            if i == j {
                return Err(Error::InvalidArgument("slice axes must differ".into()));
            }
            (unit(i)?, unit(j)?)
        }
        (None, Some([i, j])) => {
            if i == j {
                return Err(Error::InvalidArgument("slice eigenvectors must differ".into()));
            }
            let r = region.as_ref().ok_or_else(|| Error::InvalidArgument("eigenvector slices need region_stats".into()))?;
            let vecs = RegionStats::eigenvectors_from_json(r).ok_or_else(|| {
                Error::InvalidArgument("region_stats has no eigenvectors (write it with analysis.full = true)".into())
            })?;
            let get = |k: usize| {
                vecs.get(k).cloned().ok_or_else(|| Error::InvalidArgument(format!("eigenvector {k} out of range")))
            };
            (get(i)?, get(j)?)
        }
        _ => return Err(Error::InvalidArgument("set exactly one of landscape.axes or landscape.eigenvectors".into())),
    };
    let center = match &l.center {
        Center::Point(p) => p.clone(),
        Center::Named(n) if n == "baseline" => task.space().baseline_box(),
        Center::Named(n) if n == "region" => {
            let r = region.as_ref().ok_or_else(|| Error::InvalidArgument("center = \"region\" needs region_stats".into()))?;
            serde_json::from_value(r["mean"].clone()).map_err(|e| Error::InvalidArgument(e.to_string()))?
        }
        Center::Named(n) => return Err(Error::InvalidArgument(format!("unknown center '{n}'"))),
    };
    Ok((center, a, b))
}

/// Writes a 2-D slice as CSV and heatmap.
pub fn landscape(cfg: &ExperimentConfig, out: &Path) -> Result<SliceGrid> {
    let task = build_configured_task(cfg)?;
    let (center, a, b) = slice_setup(cfg, &task)?;
    let l = &cfg.landscape;
    let grid = slice_grid(&BoxView::new(task.as_ref()), &center, &a, &b, l.half_extent, l.resolution)?;
    let header = Header::new("landscape", cfg.seed, cfg.snapshot());
    let dir = task_dir(out, &task).join("landscape");
    let n = grid.resolution();
    write_csv(
        &dir.join("slice.csv"),
        &header,
        &["alpha", "beta", "loss", "diverged"],
        (0..n * n).map(|c| {
            let (i, j) = (c / n, c % n);
            vec![f(grid.alphas[i]), f(grid.betas[j]), f(grid.losses[c]), grid.diverged[c].to_string()]
        }),
    )?;
    write_text(&dir.join("slice.svg"), &heatmap(&grid, &format!("{} slice", task.name()), &header.lines()))?;
    Ok(grid)
}

/// Runs the restart loop for every (algorithm, seed) cell under its budget.
pub fn budget_study(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Cell>> {
    if cfg.algorithms.is_empty() {
        return Err(Error::Config("budget-study needs at least one [[algorithms]] entry".into()));
    }
    let task = build_configured_task(cfg)?;
    let obj = BoxView::new(task.as_ref());
    let header = Header::new("budget-study", cfg.seed, cfg.snapshot());
    let dir = task_dir(out, &task).join("budget");
    let results: Vec<Result<Cell>> = cells(cfg)
        .into_par_iter()
        .map(|(entry, k)| {
            let rc = RestartConfig {
                eval_budget: cfg.budget_for(entry),
                max_iterations: cfg.budget.max_iterations,
                stagnation_window: cfg.budget.stagnation_window,
            };
            let record = restart_loop(&entry.config, &obj, &rc, run_seed(cfg.seed, k), false)?;
            write_csv(
                &dir.join(entry.label()).join(format!("seed{k}.csv")),
                &header,
                &["iteration", "restart", "evaluations", "best_loss"],
                record.iterations.iter().map(|it| vec![it.iteration.to_string(), it.restart.to_string(), it.evaluations.to_string(), f(it.best_loss)]),
            )?;
            Ok(Cell { label: entry.label().to_string(), seed_index: k, record })
        })
        .collect();
    let cells = first_error(results)?;
    let mut chart = Chart::new(&format!("{}: restart loop", task.name()), "evaluations", "best loss", ChartKind::Line).log_x();
    let mut summary = Vec::new();
    for entry in &cfg.algorithms {
        let mine: Vec<&Cell> = cells.iter().filter(|c| c.label == entry.label()).collect();
        let finals: Vec<f64> = mine.iter().map(|c| c.record.best_loss).collect();
        let mut s = stats(&finals);
        s["label"] = json!(entry.label());
        s["budget"] = json!(cfg.budget_for(entry));
        s["final_best_loss"] = json!(finals);
        s["evaluations"] = json!(mine.iter().map(|c| c.record.evaluations()).collect::<Vec<_>>());
        s["events"] = json!(mine.iter().map(|c| &c.record.events).collect::<Vec<_>>());
        summary.push(s);
        let len = mine.iter().map(|c| c.record.iterations.len()).min().unwrap_or(0);
        let curve = (0..len)
            .map(|i| {
                let e = mine[0].record.iterations[i].evaluations as f64;
                (e, mine.iter().map(|c| c.record.iterations[i].best_loss).sum::<f64>() / mine.len() as f64)
            })
            .collect();
        chart = chart.with_series(entry.label(), curve);
    }
    write_json(&dir.join("summary.json"), &header, json!({ "task": task.name(), "algorithms": summary }))?;
    write_text(&dir.join("budget.svg"), &chart.render(&header.lines()))?;
    Ok(cells)
}

/// Header comments of a trajectory file, minus its structural lines.
fn source_comments(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string())
        .filter(|l| !l.starts_with("springs:") && !l.starts_with("ellipse_axes:"))
        .collect())
}

/// Draws every `frame_stride`-th frame of a trajectory into `out_dir`.
/// Returns the written paths.
pub fn render(trajectory: &Path, out_dir: &Path, frame_stride: usize) -> Result<Vec<PathBuf>> {
    if frame_stride == 0 {
        return Err(Error::InvalidArgument("frame stride must be positive".into()));
    }
    let file = read_trajectory_csv(trajectory)?;
    let header = source_comments(trajectory)?;
    let view = Viewport::fit(&file, 640.0, 480.0);
    let mut written = Vec::new();
    for k in (0..file.frames.len()).step_by(frame_stride) {
        let p = out_dir.join(format!("frame_{k:05}.svg"));
        write_text(&p, &trajectory_frame(&file, k, &view, &header))?;
        written.push(p);
    }
    Ok(written)
}
