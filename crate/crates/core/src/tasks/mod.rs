//! The four benchmark co-design tasks plus analytic test landscapes.
//!
//! Built-in task descriptions live as JSON files under `tasks/` in this
//! crate and are compiled in; any file with the same schema can be loaded by
//! path to define a variant.

mod locomotion;
mod manipulation;
mod synthetic;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use locomotion::{ActuatorGroupSpec, CellSprings, LocomotionSpec, LocomotionTask};
pub use manipulation::{
    mean_rotation_error, EnvironmentDraw, EnvironmentSpec, ManipulationDesign, ManipulationSpec, ManipulationTask,
};
pub use synthetic::{AnalyticTask, Landscape};

use crate::codesign::TaskHandle;
use crate::error::{Error, Result};

/// Names accepted by [`build_task`] besides file paths.
pub const TASK_NAMES: [&str; 4] = ["Loc84", "Loc155", "Mani212", "Mani320"];

const LOC84: &str = include_str!("../../tasks/loc84.json");
const LOC155: &str = include_str!("../../tasks/loc155.json");
const MANI212: &str = include_str!("../../tasks/mani212.json");
const MANI320: &str = include_str!("../../tasks/mani320.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Locomotion(LocomotionSpec),
    Manipulation(ManipulationSpec),
}

impl TaskSpec {
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name.to_ascii_lowercase().as_str() {
            "loc84" => LOC84,
            "loc155" => LOC155,
            "mani212" => MANI212,
            "mani320" => MANI320,
            _ => return Err(Error::UnknownTask(name.to_string())),
        };
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Malformed { path: path.to_path_buf(), message: e.to_string() })
    }

    /// A built-in name, or a path to a JSON task file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::builtin(name_or_path) {
            Err(Error::UnknownTask(_)) if Path::new(name_or_path).is_file() => Self::from_path(Path::new(name_or_path)),
            r => r,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            TaskSpec::Locomotion(s) => &s.name,
            TaskSpec::Manipulation(s) => &s.name,
        }
    }

    pub fn horizon(&self) -> usize {
        self.sim().steps
    }

    pub fn sim(&self) -> &crate::sim::SimConfig {
        match self {
            TaskSpec::Locomotion(s) => &s.sim,
            TaskSpec::Manipulation(s) => &s.sim,
        }
    }

    pub fn with_horizon(mut self, steps: usize) -> Self {
        match &mut self {
            TaskSpec::Locomotion(s) => s.sim.steps = steps,
            TaskSpec::Manipulation(s) => s.sim.steps = steps,
        }
        self
    }

    /// Builds the task. `seed` fixes the manipulation environment draws and
    /// is ignored by locomotion.
    pub fn build(&self, seed: u64) -> Result<TaskHandle> {
        Ok(match self {
            TaskSpec::Locomotion(s) => Arc::new(LocomotionTask::new(s.clone())?),
            TaskSpec::Manipulation(s) => Arc::new(ManipulationTask::new(s.clone(), seed)?),
        })
    }
}

/// Builds a task by name (`Loc84`, `Loc155`, `Mani212`, `Mani320`,
/// `sphere-<m>`, `rosenbrock-<m>`) or from a JSON task file.
pub fn build_task(name: &str, seed: u64) -> Result<TaskHandle> {
    if let Some((kind, m)) = name.split_once('-') {
        if let Ok(m) = m.parse::<usize>() {
            match kind {
                "sphere" if m >= 1 => return Ok(Arc::new(AnalyticTask::sphere(m))),
                "rosenbrock" if m >= 2 => return Ok(Arc::new(AnalyticTask::rosenbrock(m))),
                _ => {}
            }
        }
    }
    TaskSpec::resolve(name)?.build(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_specs_parse_and_round_trip() {
        for name in TASK_NAMES {
            let spec = TaskSpec::builtin(name).unwrap();
            assert_eq!(spec.name(), name);
            let text = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<TaskSpec>(&text).unwrap(), spec);
        }
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(build_task("Loc999", 0), Err(Error::UnknownTask(_))));
    }

    #[test]
    fn synthetic_names() {
        assert_eq!(build_task("sphere-7", 0).unwrap().space().m, 7);
        assert_eq!(build_task("rosenbrock-5", 0).unwrap().space().m, 5);
    }
}
