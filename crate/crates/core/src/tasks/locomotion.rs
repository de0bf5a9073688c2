//! Voxel walkers: springs along every voxel edge plus both diagonals,
//! actuated by per-group sinusoids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codesign::{CoDesign, Evaluation, ParamKind, ParameterSpace, Recording, Task};
use crate::error::{Error, Result};
use crate::sim::{
    rollout, rollout_with_gradient, Displacement, Node, NoActuation, SimConfig, SineGroup, Sinusoid, Spring,
    SpringNetwork, Trajectory, World,
};

/// Which springs of a voxel an actuator group drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSprings {
    Vertical,
    Horizontal,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorGroupSpec {
    pub cell: [i32; 2],
    pub springs: CellSprings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocomotionSpec {
    pub name: String,
    /// Filled voxels as `[column, row]`, row 0 touching the ground.
    pub cells: Vec<[i32; 2]>,
    pub actuators: Vec<ActuatorGroupSpec>,
    pub voxel_size: f64,
    pub node_mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Relative rest-length range, e.g. 0.2 for ±20%.
    pub rest_range: f64,
    pub stiffness_range: f64,
    pub amplitude: [f64; 2],
    pub frequency: [f64; 2],
    pub phase: [f64; 2],
    /// Initial gap between the lowest nodes and the ground.
    pub clearance: f64,
    pub sentinel_loss: f64,
    pub sim: SimConfig,
}

/// The fixed part of a voxel walker: node layout and spring topology.
#[derive(Debug, Clone)]
struct Layout {
    nodes: Vec<Node>,
    /// `(i, j, nominal rest length)`
    springs: Vec<(usize, usize, f64)>,
    spring_group: Vec<Option<usize>>,
}

fn build_layout(spec: &LocomotionSpec) -> Result<Layout> {
    if spec.cells.is_empty() {
        return Err(Error::Config(format!("{}: no cells", spec.name)));
    }
    let min_row = spec.cells.iter().map(|c| c[1]).min().unwrap_or(0);
    let s = spec.voxel_size;
    let mut node_ids: BTreeMap<(i32, i32), usize> = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut node = |gx: i32, gy: i32, nodes: &mut Vec<Node>| -> usize {
        *node_ids.entry((gx, gy)).or_insert_with(|| {
            nodes.push(Node {
                position: [gx as f64 * s, (gy - min_row) as f64 * s + spec.clearance],
                mass: spec.node_mass,
                pinned: false,
            });
            nodes.len() - 1
        })
    };
    let mut spring_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut springs = Vec::new();
    // per cell: bottom, top, left, right, diagonal, anti-diagonal
    let mut cell_springs: BTreeMap<[i32; 2], [usize; 6]> = BTreeMap::new();
    for &[cx, cy] in &spec.cells {
        if cell_springs.contains_key(&[cx, cy]) {
            return Err(Error::Config(format!("{}: duplicate cell [{cx}, {cy}]", spec.name)));
        }
        let c00 = node(cx, cy, &mut nodes);
        let c10 = node(cx + 1, cy, &mut nodes);
        let c01 = node(cx, cy + 1, &mut nodes);
        let c11 = node(cx + 1, cy + 1, &mut nodes);
        let pairs = [(c00, c10, s), (c01, c11, s), (c00, c01, s), (c10, c11, s), (c00, c11, s * 2f64.sqrt()), (c10, c01, s * 2f64.sqrt())];
        let mut ids = [0; 6];
        for (k, &(i, j, r)) in pairs.iter().enumerate() {
            let key = (i.min(j), i.max(j));
            ids[k] = *spring_ids.entry(key).or_insert_with(|| {
                springs.push((i, j, r));
                springs.len() - 1
            });
        }
        cell_springs.insert([cx, cy], ids);
    }
    let mut spring_group = vec![None; springs.len()];
    for (g, a) in spec.actuators.iter().enumerate() {
        let ids = cell_springs
            .get(&a.cell)
            .ok_or_else(|| Error::Config(format!("{}: actuator cell {:?} is not filled", spec.name, a.cell)))?;
        let picked = match a.springs {
            CellSprings::Horizontal => [ids[0], ids[1]],
            CellSprings::Vertical => [ids[2], ids[3]],
            CellSprings::Diagonal => [ids[4], ids[5]],
        };
        for sp in picked {
            if let Some(other) = spring_group[sp] {
                return Err(Error::Config(format!("{}: spring {sp} driven by groups {other} and {g}", spec.name)));
            }
            spring_group[sp] = Some(g);
        }
    }
    Ok(Layout { nodes, springs, spring_group })
}

/// A locomotion co-design task.
///
/// Parameters are laid out as `[rest lengths | stiffnesses | (A, ω, φ) per
/// group]`, all in physical units. Loss is the negative horizontal
/// displacement of the center of mass.
pub struct LocomotionTask {
    spec: LocomotionSpec,
    layout: Layout,
    space: ParameterSpace,
}

impl LocomotionTask {
    pub fn new(spec: LocomotionSpec) -> Result<Self> {
        spec.sim.validate()?;
        let layout = build_layout(&spec)?;
        let ns = layout.springs.len();
        let ng = spec.actuators.len();
        let mut lower = Vec::with_capacity(2 * ns + 3 * ng);
        let mut upper = Vec::with_capacity(2 * ns + 3 * ng);
        let mut baseline = Vec::with_capacity(2 * ns + 3 * ng);
        for &(_, _, r) in &layout.springs {
            lower.push(r * (1.0 - spec.rest_range));
            upper.push(r * (1.0 + spec.rest_range));
            baseline.push(r);
        }
        for _ in 0..ns {
            lower.push(spec.stiffness * (1.0 - spec.stiffness_range));
            upper.push(spec.stiffness * (1.0 + spec.stiffness_range));
            baseline.push(spec.stiffness);
        }
        for _ in 0..ng {
            for b in [spec.amplitude, spec.frequency, spec.phase] {
                lower.push(b[0]);
                upper.push(b[1]);
                baseline.push(0.5 * (b[0] + b[1]));
            }
        }
        let mut labels = vec![ParamKind::Morphology; 2 * ns];
        labels.extend(vec![ParamKind::Control; 3 * ng]);
        let space = ParameterSpace::new(lower, upper, baseline, labels)?;
        Ok(Self { spec, layout, space })
    }

    pub fn spec(&self) -> &LocomotionSpec {
        &self.spec
    }

    pub fn num_springs(&self) -> usize {
        self.layout.springs.len()
    }

    pub fn num_groups(&self) -> usize {
        self.spec.actuators.len()
    }

    /// Builds the simulated robot for `x`.
    pub fn decode(&self, x: &CoDesign) -> Result<(SpringNetwork, Sinusoid)> {
        self.space.check(x)?;
        let ns = self.num_springs();
        let v = &x.values;
        let springs = self
            .layout
            .springs
            .iter()
            .enumerate()
            .map(|(k, &(i, j, _))| Spring {
                i,
                j,
                rest_length: v[k],
                stiffness: v[ns + k],
                damping: self.spec.damping,
                actuated: self.layout.spring_group[k].is_some(),
            })
            .collect();
        let groups = v[2 * ns..]
            .chunks_exact(3)
            .map(|c| SineGroup { amplitude: c[0], frequency: c[1], phase: c[2] })
            .collect();
        let net = SpringNetwork { nodes: self.layout.nodes.clone(), springs };
        Ok((net, Sinusoid { groups, spring_group: self.layout.spring_group.clone() }))
    }

    /// Inverse of [`decode`](Self::decode).
    pub fn encode(&self, net: &SpringNetwork, act: &Sinusoid) -> Result<CoDesign> {
        if net.springs.len() != self.num_springs() || act.groups.len() != self.num_groups() {
            return Err(Error::InvalidArgument("network does not match this task's topology".into()));
        }
        let mut values: Vec<f64> = net.springs.iter().map(|s| s.rest_length).collect();
        values.extend(net.springs.iter().map(|s| s.stiffness));
        for g in &act.groups {
            values.extend([g.amplitude, g.frequency, g.phase]);
        }
        Ok(CoDesign::new(values))
    }

    fn config(&self, record_stride: Option<usize>) -> SimConfig {
        let mut cfg = self.spec.sim.clone();
        cfg.record_stride = record_stride.unwrap_or(cfg.steps);
        cfg
    }

    /// Full rollout with frames every `record_stride` steps.
    pub fn simulate(&self, x: &CoDesign, record_stride: usize) -> Result<(f64, SpringNetwork, Trajectory)> {
        let (net, act) = self.decode(x)?;
        let cfg = self.config(Some(record_stride));
        let world = World { network: &net, actuation: &act, ellipse: None, config: &cfg };
        let (loss, traj) = rollout(&world, &Displacement::default())?;
        Ok((loss, net, traj))
    }

    /// The robot settling passively, for comparison.
    pub fn passive_loss(&self, x: &CoDesign) -> Result<f64> {
        let (net, _) = self.decode(x)?;
        let cfg = self.config(None);
        let world = World { network: &net, actuation: &NoActuation, ellipse: None, config: &cfg };
        Ok(rollout(&world, &Displacement::default())?.0)
    }
}

impl Task for LocomotionTask {
    fn name(&self) -> &str {
        &self.spec.name
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&self, x: &CoDesign) -> Result<Evaluation> {
        let (net, act) = self.decode(x)?;
        let cfg = self.config(None);
        let world = World { network: &net, actuation: &act, ellipse: None, config: &cfg };
        let (loss, _) = rollout(&world, &Displacement::default())?;
        Ok(Evaluation { loss, gradient: None })
    }

    fn evaluate_with_gradient(&self, x: &CoDesign) -> Result<Evaluation> {
        let (net, act) = self.decode(x)?;
        let cfg = self.config(None);
        let world = World { network: &net, actuation: &act, ellipse: None, config: &cfg };
        let (loss, g) = rollout_with_gradient(&world, &Displacement::default())?;
        let mut gradient = g.rest_length;
        gradient.extend(g.stiffness);
        gradient.extend(g.actuation);
        Ok(Evaluation { loss, gradient: Some(gradient) })
    }

    fn sentinel_loss(&self) -> f64 {
        self.spec.sentinel_loss
    }

    fn record(&self, x: &CoDesign, stride: usize) -> Result<Option<Recording>> {
        let (_, network, trajectory) = self.simulate(x, stride)?;
        Ok(Some(Recording { network, trajectory, ellipse_axes: None }))
    }
}
