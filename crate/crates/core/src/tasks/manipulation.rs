//! Two soft fingers rotating an ellipse.
//!
//! Each finger hangs from two pinned mount nodes and is a zig-zag strip of
//! nodes alternating between its inner side (facing the other finger) and
//! its outer side. Node `k ≥ 2` belongs to geometry block `k − 2`, which sets
//! its axial advance `L/2` and its lateral spread `W`. Springs connect each
//! node to its next three successors along the strip, and the first two
//! nodes to both mounts, giving `3G + 4` springs for `G` blocks.
//!
//! Curvature commands shorten the inner same-side springs and lengthen the
//! outer ones (positive curvature curls a finger inward). There is one
//! command channel per finger half (proximal/distal) and `knots` values per
//! channel spread over five equal segments of the first half of the horizon.

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codesign::{CoDesign, Evaluation, ParamKind, ParameterSpace, Recording, Task};
use crate::error::{Error, Result};
use crate::rng::{substream, tag};
use crate::sim::{
    rollout, rollout_with_gradient, CurvatureSchedule, Node, RigidEllipse, Rotation, SimConfig, Spring,
    SpringNetwork, TorqueSchedule, Trajectory, Vec2, World,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub semi_major: f64,
    pub semi_minor: f64,
    pub mass: f64,
    pub x_range: [f64; 2],
    pub angle_range: [f64; 2],
    pub scale_range: [f64; 2],
    pub torque_windows: usize,
    pub torque_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationSpec {
    pub name: String,
    pub blocks_per_finger: usize,
    pub knots: usize,
    pub segments: usize,
    pub finger_length: f64,
    pub block_width: f64,
    pub length_range: f64,
    pub width_range: f64,
    pub stiffness: f64,
    pub stiffness_range: f64,
    /// Bound on each finger's outward shift; positive widens the gap.
    pub offset_range: f64,
    /// Nominal distance between the two finger center lines.
    pub finger_gap: f64,
    pub mount_height: f64,
    pub node_mass: f64,
    pub damping: f64,
    pub curvature_bound: f64,
    /// Required rotation of the object in radians.
    pub target_rotation: f64,
    pub n_envs: usize,
    pub environment: EnvironmentSpec,
    pub sentinel_loss: f64,
    pub sim: SimConfig,
}

/// Per-environment randomization, fixed for a given task seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentDraw {
    pub x: f64,
    pub angle: f64,
    pub scale: f64,
    pub torques: Vec<f64>,
}

/// Everything a co-design vector decodes to.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulationDesign {
    pub network: SpringNetwork,
    pub curvature: CurvatureSchedule,
    /// `[finger][block]`
    pub block_length: [Vec<f64>; 2],
    pub block_width: [Vec<f64>; 2],
    pub offsets: [f64; 2],
}

/// Mean of `|Δθ − target|` over environments.
pub fn mean_rotation_error(rotations: &[f64], target: f64) -> f64 {
    rotations.iter().map(|r| (r - target).abs()).sum::<f64>() / rotations.len() as f64
}

pub struct ManipulationTask {
    spec: ManipulationSpec,
    space: ParameterSpace,
    draws: Vec<EnvironmentDraw>,
    seed: u64,
}

struct Offsets {
    stiffness: usize,
    geometry: usize,
    offsets: usize,
    control: usize,
}

impl ManipulationTask {
    pub fn new(spec: ManipulationSpec, seed: u64) -> Result<Self> {
        spec.sim.validate()?;
        let g = spec.blocks_per_finger;
        if g < 2 || spec.knots == 0 || spec.segments == 0 || spec.n_envs == 0 {
            return Err(Error::Config(format!("{}: need >= 2 blocks, >= 1 knot, segment and environment", spec.name)));
        }
        let e = &spec.environment;
        if !(e.semi_major * e.scale_range[0] >= e.semi_minor) {
            return Err(Error::Config(format!("{}: scaled semi-major axis falls below semi-minor", spec.name)));
        }
        let ns = 2 * (3 * g + 4);
        let l0 = spec.finger_length * 2.0 / g as f64;
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut baseline = Vec::new();
        let mut push = |lo: f64, hi: f64, base: f64| {
            lower.push(lo);
            upper.push(hi);
            baseline.push(base);
        };
        for _ in 0..ns {
            push(spec.stiffness * (1.0 - spec.stiffness_range), spec.stiffness * (1.0 + spec.stiffness_range), spec.stiffness);
        }
        for _ in 0..2 * g {
            push(l0 * (1.0 - spec.length_range), l0 * (1.0 + spec.length_range), l0);
            push(
                spec.block_width * (1.0 - spec.width_range),
                spec.block_width * (1.0 + spec.width_range),
                spec.block_width,
            );
        }
        for _ in 0..2 {
            push(-spec.offset_range, spec.offset_range, 0.0);
        }
        let m_morph = ns + 4 * g + 2;
        for _ in 0..4 * spec.knots {
            push(-spec.curvature_bound, spec.curvature_bound, 0.0);
        }
        let m = lower.len();
        let labels = (0..m).map(|i| if i < m_morph { ParamKind::Morphology } else { ParamKind::Control }).collect();
        let space = ParameterSpace::new(lower, upper, baseline, labels)?;
        let draws = (0..spec.n_envs).map(|k| draw_environment(&spec, seed, k)).collect();
        Ok(Self { spec, space, draws, seed })
    }

    pub fn spec(&self) -> &ManipulationSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draws(&self) -> &[EnvironmentDraw] {
        &self.draws
    }

    fn layout(&self) -> Offsets {
        let g = self.spec.blocks_per_finger;
        let ns = 2 * (3 * g + 4);
        Offsets { stiffness: 0, geometry: ns, offsets: ns + 4 * g, control: ns + 4 * g + 2 }
    }

    fn nodes_per_finger(&self) -> usize {
        self.spec.blocks_per_finger + 4
    }

    fn springs_per_finger(&self) -> usize {
        3 * self.spec.blocks_per_finger + 4
    }

    /// `-1` for the left finger, `+1` for the right.
    fn side_sign(f: usize) -> f64 {
        if f == 0 {
            -1.0
        } else {
            1.0
        }
    }

    fn nominal_block_length(&self) -> f64 {
        self.spec.finger_length * 2.0 / self.spec.blocks_per_finger as f64
    }

    /// Node positions of finger `f`: strip nodes then the two mounts.
    fn finger_positions(&self, f: usize, len: &[f64], wid: &[f64], offset: f64) -> Vec<Vec2> {
        let s = Self::side_sign(f);
        let inner = -s;
        let root_x = s * (0.5 * self.spec.finger_gap + offset);
        let h = self.spec.mount_height;
        let l0 = self.nominal_block_length();
        let w0 = self.spec.block_width;
        let g = self.spec.blocks_per_finger;
        let mut pos = Vec::with_capacity(g + 4);
        let mut axial = 0.0;
        for k in 0..g + 2 {
            let (step, w) = match k {
                0 => (0.0, w0),
                1 => (0.5 * l0, w0),
                _ => (0.5 * len[k - 2], wid[k - 2]),
            };
            axial += step;
            let lateral = if k % 2 == 0 { 0.5 * w } else { -0.5 * w };
            pos.push([root_x + inner * lateral, h - axial]);
        }
        pos.push([root_x + inner * 0.5 * w0, h + 0.5 * l0]);
        pos.push([root_x - inner * 0.5 * w0, h + 0.5 * l0]);
        pos
    }

    /// `(i, j)` pairs of finger-local spring endpoints, in parameter order.
    fn finger_topology(&self) -> Vec<(usize, usize)> {
        let g = self.spec.blocks_per_finger;
        let mut t = Vec::with_capacity(3 * g + 4);
        t.extend((0..=g).map(|k| (k, k + 1)));
        t.extend((0..g).map(|k| (k, k + 2)));
        t.extend((0..g - 1).map(|k| (k, k + 3)));
        let (m0, m1) = (g + 2, g + 3);
        t.extend([(m0, 0), (m1, 1), (m0, 1), (m1, 0)]);
        t
    }

    /// Curvature channel and sign of each finger-local spring.
    fn finger_channels(&self, f: usize) -> Vec<Option<(usize, f64)>> {
        let g = self.spec.blocks_per_finger;
        let mut ch = vec![None; 3 * g + 4];
        for k in 0..g {
            let half = if 2 * k < g { 0 } else { 1 };
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            ch[g + 1 + k] = Some((2 * f + half, sign));
        }
        ch
    }

    pub fn decode(&self, x: &CoDesign) -> Result<ManipulationDesign> {
        self.space.check(x)?;
        let v = &x.values;
        let o = self.layout();
        let g = self.spec.blocks_per_finger;
        let spf = self.springs_per_finger();
        let npf = self.nodes_per_finger();
        let topo = self.finger_topology();
        let mut nodes = Vec::with_capacity(2 * npf);
        let mut springs = Vec::with_capacity(2 * spf);
        let mut channels = Vec::with_capacity(2 * spf);
        let mut block_length = [Vec::new(), Vec::new()];
        let mut block_width = [Vec::new(), Vec::new()];
        let offsets = [v[o.offsets], v[o.offsets + 1]];
        for f in 0..2 {
            let geo = &v[o.geometry + 2 * g * f..o.geometry + 2 * g * (f + 1)];
            block_length[f] = geo.iter().step_by(2).copied().collect();
            block_width[f] = geo.iter().skip(1).step_by(2).copied().collect();
            let pos = self.finger_positions(f, &block_length[f], &block_width[f], offsets[f]);
            let base = f * npf;
            for (k, p) in pos.iter().enumerate() {
                nodes.push(Node { position: *p, mass: self.spec.node_mass, pinned: k >= g + 2 });
            }
            let fch = self.finger_channels(f);
            for (s, &(i, j)) in topo.iter().enumerate() {
                let d = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]];
                springs.push(Spring {
                    i: base + i,
                    j: base + j,
                    rest_length: d[0].hypot(d[1]),
                    stiffness: v[o.stiffness + f * spf + s],
                    damping: self.spec.damping,
                    actuated: fch[s].is_some(),
                });
                channels.push(fch[s]);
            }
        }
        let k = self.spec.knots;
        let nseg = self.spec.segments;
        let curvature = CurvatureSchedule {
            knots: k,
            values: v[o.control..].to_vec(),
            segment_knot: (0..nseg).map(|j| j * k / nseg).collect(),
            active_until: 0.5 * self.spec.sim.steps as f64 * self.spec.sim.dt,
            spring_channel: channels,
        };
        Ok(ManipulationDesign {
            network: SpringNetwork { nodes, springs },
            curvature,
            block_length,
            block_width,
            offsets,
        })
    }

    /// Inverse of [`decode`](Self::decode).
    pub fn encode(&self, d: &ManipulationDesign) -> Result<CoDesign> {
        let g = self.spec.blocks_per_finger;
        if d.network.springs.len() != 2 * self.springs_per_finger()
            || d.block_length.iter().chain(&d.block_width).any(|b| b.len() != g)
            || d.curvature.values.len() != 4 * self.spec.knots
        {
            return Err(Error::InvalidArgument("design does not match this task's topology".into()));
        }
        let mut values: Vec<f64> = d.network.springs.iter().map(|s| s.stiffness).collect();
        for f in 0..2 {
            for b in 0..g {
                values.extend([d.block_length[f][b], d.block_width[f][b]]);
            }
        }
        values.extend(d.offsets);
        values.extend(&d.curvature.values);
        Ok(CoDesign::new(values))
    }

    fn env_setup(&self, e: &EnvironmentDraw) -> (RigidEllipse, SimConfig) {
        let es = &self.spec.environment;
        let a = es.semi_major * e.scale;
        let b = es.semi_minor;
        let cfg = &self.spec.sim;
        let center = [e.x, cfg.ground_height + RigidEllipse::support_depth(a, b, e.angle)];
        let ellipse = RigidEllipse::solid(center, e.angle, a, b, es.mass);
        let half = 0.5 * cfg.steps as f64 * cfg.dt;
        let mut cfg = cfg.clone();
        cfg.external_torque = Some(TorqueSchedule {
            start: half,
            window: half / es.torque_windows.max(1) as f64,
            torques: e.torques.clone(),
        });
        cfg.record_stride = cfg.steps;
        (ellipse, cfg)
    }

    /// Rollout of one environment with frames every `record_stride` steps.
    pub fn simulate(&self, x: &CoDesign, env: usize, record_stride: usize) -> Result<(f64, ManipulationDesign, RigidEllipse, Trajectory)> {
        let d = self.decode(x)?;
        let draw = self.draws.get(env).ok_or_else(|| Error::InvalidArgument(format!("no environment {env}")))?;
        let (ellipse, mut cfg) = self.env_setup(draw);
        cfg.record_stride = record_stride;
        let world = World { network: &d.network, actuation: &d.curvature, ellipse: Some(&ellipse), config: &cfg };
        let (loss, traj) = rollout(&world, &Rotation { target: self.spec.target_rotation })?;
        Ok((loss, d, ellipse, traj))
    }

    /// Per-environment losses; diverged environments get the sentinel.
    pub fn environment_losses(&self, x: &CoDesign) -> Result<Vec<f64>> {
        let d = self.decode(x)?;
        let loss = Rotation { target: self.spec.target_rotation };
        Ok(self
            .draws
            .par_iter()
            .map(|e| {
                let (ellipse, cfg) = self.env_setup(e);
                let world = World { network: &d.network, actuation: &d.curvature, ellipse: Some(&ellipse), config: &cfg };
                rollout(&world, &loss).map_or(self.spec.sentinel_loss, |(l, _)| l)
            })
            .collect())
    }

    /// Chains rest-length and node-position adjoints into block geometry and
    /// finger offsets.
    fn geometry_gradient(&self, d: &ManipulationDesign, g_rest: &[f64], g_pos: &[Vec2], out: &mut [f64]) {
        let g = self.spec.blocks_per_finger;
        let npf = self.nodes_per_finger();
        let mut gp = g_pos.to_vec();
        for (s, sp) in d.network.springs.iter().enumerate() {
            let (pi, pj) = (d.network.nodes[sp.i].position, d.network.nodes[sp.j].position);
            let dir = [(pi[0] - pj[0]) / sp.rest_length, (pi[1] - pj[1]) / sp.rest_length];
            gp[sp.i][0] += g_rest[s] * dir[0];
            gp[sp.i][1] += g_rest[s] * dir[1];
            gp[sp.j][0] -= g_rest[s] * dir[0];
            gp[sp.j][1] -= g_rest[s] * dir[1];
        }
        let o = self.layout();
        for f in 0..2 {
            let nodes = &gp[f * npf..(f + 1) * npf];
            let s = Self::side_sign(f);
            let inner = -s;
            out[o.offsets + f] = s * nodes.iter().map(|p| p[0]).sum::<f64>();
            // axial position of node k sums L_b / 2 over blocks b ≤ k − 2
            let mut suffix = 0.0;
            for b in (0..g).rev() {
                let k = b + 2;
                suffix += nodes[k][1];
                let lateral_sign = if k % 2 == 0 { 0.5 } else { -0.5 };
                out[o.geometry + 2 * g * f + 2 * b] = -0.5 * suffix;
                out[o.geometry + 2 * g * f + 2 * b + 1] = inner * lateral_sign * nodes[k][0];
            }
        }
    }
}

fn draw_environment(spec: &ManipulationSpec, seed: u64, k: usize) -> EnvironmentDraw {
    let mut rng = substream(seed, &[tag::ENV, k as u64]);
    let e = &spec.environment;
    let mut uniform = |r: [f64; 2]| r[0] + (r[1] - r[0]) * rng.random::<f64>();
    let x = uniform(e.x_range);
    let angle = uniform(e.angle_range);
    let scale = uniform(e.scale_range);
    let torques = (0..e.torque_windows).map(|_| uniform([-e.torque_max, e.torque_max])).collect();
    EnvironmentDraw { x, angle, scale, torques }
}

impl Task for ManipulationTask {
    fn name(&self) -> &str {
        &self.spec.name
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&self, x: &CoDesign) -> Result<Evaluation> {
        let losses = self.environment_losses(x)?;
        Ok(Evaluation { loss: losses.iter().sum::<f64>() / losses.len() as f64, gradient: None })
    }

    fn evaluate_with_gradient(&self, x: &CoDesign) -> Result<Evaluation> {
        let d = self.decode(x)?;
        let loss = Rotation { target: self.spec.target_rotation };
        let per_env: Vec<_> = self
            .draws
            .par_iter()
            .map(|e| {
                let (ellipse, cfg) = self.env_setup(e);
                let world = World { network: &d.network, actuation: &d.curvature, ellipse: Some(&ellipse), config: &cfg };
                rollout_with_gradient(&world, &loss).ok()
            })
            .collect();
        let n = self.spec.n_envs as f64;
        let ns = d.network.springs.len();
        let nn = d.network.nodes.len();
        let mut total = 0.0;
        let mut g_rest = vec![0.0; ns];
        let mut g_pos = vec![[0.0; 2]; nn];
        let mut gradient = vec![0.0; self.space.m];
        let o = self.layout();
        for r in per_env {
            let Some((l, sg)) = r else {
                total += self.spec.sentinel_loss;
                continue;
            };
            total += l;
            for s in 0..ns {
                gradient[o.stiffness + s] += sg.stiffness[s] / n;
                g_rest[s] += sg.rest_length[s] / n;
            }
            for k in 0..nn {
                g_pos[k][0] += sg.initial_position[k][0] / n;
                g_pos[k][1] += sg.initial_position[k][1] / n;
            }
            for (gc, a) in gradient[o.control..].iter_mut().zip(&sg.actuation) {
                *gc += a / n;
            }
        }
        self.geometry_gradient(&d, &g_rest, &g_pos, &mut gradient);
        Ok(Evaluation { loss: total / n, gradient: Some(gradient) })
    }

    fn sentinel_loss(&self) -> f64 {
        self.spec.sentinel_loss
    }

    /// Records the first environment.
    fn record(&self, x: &CoDesign, stride: usize) -> Result<Option<Recording>> {
        let (_, design, ellipse, trajectory) = self.simulate(x, 0, stride)?;
        Ok(Some(Recording { network: design.network, trajectory, ellipse_axes: Some((ellipse.semi_major, ellipse.semi_minor)) }))
    }
}
