//! 2D mass-spring simulator with penalty contact and reverse-mode gradients.
//!
//! Time stepping is semi-implicit Euler. Ground and node–ellipse contacts use
//! a softplus-smoothed penalty so the rollout loss is differentiable
//! everywhere; the backward pass replays the stored trajectory in reverse.

mod actuation;
mod engine;
mod export;
mod fd;
mod forces;
mod loss;
pub mod real;

pub use actuation::{Actuation, CurvatureSchedule, NoActuation, SineGroup, Sinusoid};
pub use engine::{
    rollout, rollout_with_gradient, step, BodyState, SimGradient, SimState, Trajectory, TrajectoryFrame, World,
    GRADIENT_LIMIT,
};
pub use export::{read_trajectory_csv, write_trajectory_csv, TrajectoryFile};
pub use fd::finite_difference_gradient;
pub use forces::{body_ground_contact, node_ellipse_contact, spring_force, ContactModel};
pub use loss::{Displacement, LossSpec, Rotation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub position: Vec2,
    pub mass: f64,
    /// Pinned nodes never move; their position is still a parameter.
    #[serde(default)]
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spring {
    pub i: usize,
    pub j: usize,
    pub rest_length: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub actuated: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpringNetwork {
    pub nodes: Vec<Node>,
    pub springs: Vec<Spring>,
}

impl SpringNetwork {
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidArgument("network has no nodes".into()));
        }
        if let Some(k) = self.nodes.iter().position(|nd| !(nd.mass > 0.0)) {
            return Err(Error::InvalidArgument(format!("node {k} has non-positive mass")));
        }
        for (k, s) in self.springs.iter().enumerate() {
            if s.i == s.j || s.i >= n || s.j >= n {
                return Err(Error::InvalidArgument(format!("spring {k} has invalid endpoints")));
            }
            if !(s.rest_length > 0.0) || !(s.stiffness >= 0.0) {
                return Err(Error::InvalidArgument(format!("spring {k} has invalid rest length or stiffness")));
            }
        }
        if !self.is_anchored() {
            return Err(Error::InvalidArgument("network has a free-floating disconnected part".into()));
        }
        Ok(())
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// Connected, or every connected component holds a pinned node.
    pub fn is_anchored(&self) -> bool {
        let comp = self.components();
        let count = comp.iter().max().map_or(0, |&c| c + 1);
        let mut pinned = vec![false; count];
        for (c, n) in comp.iter().zip(&self.nodes) {
            pinned[*c] |= n.pinned;
        }
        count == 1 || pinned.into_iter().all(|p| p)
    }

    /// Component label of every node, numbered in order of first node.
    fn components(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for s in &self.springs {
            adj[s.i].push(s.j);
            adj[s.j].push(s.i);
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.mass).sum()
    }

    /// Mass-weighted mean x coordinate of `positions`.
    pub fn center_of_mass_x(&self, positions: &[Vec2]) -> f64 {
        self.nodes.iter().zip(positions).map(|(n, p)| n.mass * p[0]).sum::<f64>() / self.total_mass()
    }
}

/// Rigid elliptical object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidEllipse {
    pub center: Vec2,
    pub angle: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub mass: f64,
    pub inertia: f64,
    pub linear_velocity: Vec2,
    pub angular_velocity: f64,
}

impl RigidEllipse {
    /// Uniform-density ellipse at rest.
    pub fn solid(center: Vec2, angle: f64, semi_major: f64, semi_minor: f64, mass: f64) -> Self {
        Self {
            center,
            angle,
            semi_major,
            semi_minor,
            mass,
            inertia: 0.25 * mass * (semi_major * semi_major + semi_minor * semi_minor),
            linear_velocity: [0.0; 2],
            angular_velocity: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.semi_major >= self.semi_minor && self.semi_minor > 0.0 && self.mass > 0.0 && self.inertia > 0.0) {
            return Err(Error::InvalidArgument("invalid ellipse geometry or mass".into()));
        }
        Ok(())
    }

    /// Height of the lowest point above the center for orientation `angle`.
    pub fn support_depth(semi_major: f64, semi_minor: f64, angle: f64) -> f64 {
        let (s, c) = angle.sin_cos();
        (semi_major * semi_major * s * s + semi_minor * semi_minor * c * c).sqrt()
    }
}

/// Piecewise-constant external torque on the object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueSchedule {
    pub start: f64,
    pub window: f64,
    pub torques: Vec<f64>,
}

impl TorqueSchedule {
    pub fn at(&self, t: f64) -> f64 {
        if t < self.start || self.torques.is_empty() {
            return 0.0;
        }
        let k = ((t - self.start) / self.window).floor() as usize;
        self.torques[k.min(self.torques.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub steps: usize,
    pub gravity: Vec2,
    pub ground_enabled: bool,
    pub ground_height: f64,
    pub ground_contact: ContactModel,
    pub ellipse_contact: ContactModel,
    pub ellipse_ground_contact: ContactModel,
    pub external_torque: Option<TorqueSchedule>,
    pub record_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 4e-3,
            steps: 1024,
            gravity: [0.0, -9.81],
            ground_enabled: true,
            ground_height: 0.0,
            ground_contact: ContactModel { stiffness: 2.0e4, damping: 100.0, friction: 0.6, smoothing: 5e-3, slip_velocity: 0.5 },
            ellipse_contact: ContactModel { stiffness: 4.0e3, damping: 20.0, friction: 0.6, smoothing: 5e-3, slip_velocity: 0.5 },
            ellipse_ground_contact: ContactModel { stiffness: 2.0e4, damping: 100.0, friction: 0.6, smoothing: 5e-3, slip_velocity: 0.5 },
            external_torque: None,
            record_stride: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.steps == 0 || self.record_stride == 0 {
            return Err(Error::InvalidArgument("dt > 0, steps >= 1 and record_stride >= 1 required".into()));
        }
        for c in [&self.ground_contact, &self.ellipse_contact, &self.ellipse_ground_contact] {
            if !(c.stiffness >= 0.0) || !(c.smoothing > 0.0) || !(c.slip_velocity > 0.0) {
                return Err(Error::InvalidArgument("invalid contact model".into()));
            }
        }
        Ok(())
    }
}
