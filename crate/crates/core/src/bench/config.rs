//! Experiment configuration, read from TOML or JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::AlgorithmConfig;

/// One optimizer entry. `label` names its output directory and defaults to
/// the algorithm name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub config: AlgorithmConfig,
}

impl AlgorithmEntry {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.config.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub regions: usize,
    /// Gaussian radius of a region, in box units.
    pub sigma: f64,
    /// Gradients per region.
    pub samples: usize,
    /// Harvest every `stride`-th iteration of each run.
    pub stride: usize,
    /// Directory written by `optimize`; when absent the configured
    /// algorithms are run first, and with no algorithms either, region
    /// centers are drawn uniformly.
    pub records: Option<PathBuf>,
    /// Keep eigenvectors in `regions.json`.
    pub full: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { regions: 50, sigma: 0.05, samples: 100, stride: 1, records: None, full: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Center {
    /// `"baseline"` or `"region"` (mean of the chosen region).
    Named(String),
    Point(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub center: Center,
    /// Two parameter indices.
    pub axes: Option<[usize; 2]>,
    /// Two eigenvector indices of `region` in `region_stats`.
    pub eigenvectors: Option<[usize; 2]>,
    /// A `regions.json` written by `analyze`.
    pub region_stats: Option<PathBuf>,
    pub region: usize,
    pub resolution: usize,
    pub half_extent: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            center: Center::Named("baseline".into()),
            axes: None,
            eigenvectors: None,
            region_stats: None,
            region: 0,
            resolution: crate::landscape::DEFAULT_RESOLUTION,
            half_extent: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    /// Evaluation budget of the reference algorithm.
    pub base: usize,
    /// Budget factor for every other algorithm.
    pub multiplier: f64,
    pub reference: String,
    /// Explicit budgets by label, overriding the two rules above.
    pub budgets: BTreeMap<String, usize>,
    pub max_iterations: usize,
    pub stagnation_window: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            base: 25_000,
            multiplier: 20.0,
            reference: "gcpfo".into(),
            budgets: BTreeMap::new(),
            max_iterations: 250,
            stagnation_window: crate::optimizers::STAGNATION_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in task name, `sphere-<m>` / `rosenbrock-<m>`, or a task file.
    pub task: String,
    #[serde(default)]
    pub seed: u64,
    /// Number of seeds per algorithm.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Simulation steps; the task's own horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub log_points: bool,
    /// Record stride of the best design's exported trajectory; 0 disables it.
    #[serde(default = "default_trajectory_stride")]
    pub trajectory_stride: usize,
    #[serde(default)]
    pub algorithms: Vec<AlgorithmEntry>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub landscape: LandscapeConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
}

fn default_seeds() -> usize {
    5
}

fn default_iterations() -> usize {
    50
}

fn default_trajectory_stride() -> usize {
    8
}

impl ExperimentConfig {
    pub fn for_task(task: &str) -> Self {
        serde_json::from_value(serde_json::json!({ "task": task })).expect("minimal config parses")
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.analysis.records);
        rebase(&mut cfg.landscape.region_stats);
        if cfg.task.ends_with(".json") && Path::new(&cfg.task).is_relative() {
            cfg.task = base.join(&cfg.task).to_string_lossy().into_owned();
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 || self.iterations == 0 {
            return Err(Error::Config("seeds and iterations must be at least 1".into()));
        }
        if self.horizon == Some(0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &self.algorithms {
            if !seen.insert(a.label()) {
                return Err(Error::Config(format!("duplicate algorithm label '{}'", a.label())));
            }
            if a.label().is_empty() || a.label().contains(['/', '\\']) {
                return Err(Error::Config(format!("label '{}' is not a valid directory name", a.label())));
            }
        }
        let an = &self.analysis;
        if an.regions == 0 || an.samples == 0 || an.stride == 0 || !(an.sigma >= 0.0) {
            return Err(Error::Config("analysis needs regions, samples, stride >= 1 and sigma >= 0".into()));
        }
        if self.budget.base == 0 || !(self.budget.multiplier > 0.0) {
            return Err(Error::Config("budget base and multiplier must be positive".into()));
        }
        Ok(())
    }

    /// Scales protocol constants up to the full-size study.
    pub fn apply_paper_scale(&mut self) {
        self.seeds = self.seeds.max(5);
        self.horizon = None;
        self.analysis.regions = 1000;
        self.budget.base = 50_000;
        self.budget.multiplier = 1000.0;
    }

    /// Budget assigned to an algorithm entry in the budget study.
    pub fn budget_for(&self, entry: &AlgorithmEntry) -> usize {
        if let Some(&b) = self.budget.budgets.get(entry.label()) {
            return b;
        }
        if entry.config.name() == self.budget.reference || entry.label() == self.budget.reference {
            self.budget.base
        } else {
            (self.budget.base as f64 * self.budget.multiplier).round() as usize
        }
    }

    /// The snapshot embedded in every output file.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
