use super::engine::{SimState, StateAdjoint};
use super::SpringNetwork;

/// Scalar loss on the first and last state of a rollout.
pub trait LossSpec: Sync {
    fn loss(&self, net: &SpringNetwork, initial: &SimState, last: &SimState) -> f64;
    /// Adds `seed · ∂loss/∂state` into the two adjoints.
    fn backprop(
        &self,
        net: &SpringNetwork,
        initial: &SimState,
        last: &SimState,
        seed: f64,
        g_initial: &mut StateAdjoint,
        g_last: &mut StateAdjoint,
    );
}

/// `−scale · (x_com(T) − x_com(0))`: rewards travelling in +x.
#[derive(Debug, Clone, Copy)]
pub struct Displacement {
    pub scale: f64,
}

impl Default for Displacement {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl LossSpec for Displacement {
    fn loss(&self, net: &SpringNetwork, initial: &SimState, last: &SimState) -> f64 {
        -self.scale * (net.center_of_mass_x(&last.pos) - net.center_of_mass_x(&initial.pos))
    }

    fn backprop(
        &self,
        net: &SpringNetwork,
        _initial: &SimState,
        _last: &SimState,
        seed: f64,
        g_initial: &mut StateAdjoint,
        g_last: &mut StateAdjoint,
    ) {
        let total = net.total_mass();
        for (k, n) in net.nodes.iter().enumerate() {
            let w = seed * self.scale * n.mass / total;
            g_last.pos[k][0] -= w;
            g_initial.pos[k][0] += w;
        }
    }
}

/// `|θ(T) − θ(0) − target|` for the rigid object.
#[derive(Debug, Clone, Copy)]
pub struct Rotation {
    pub target: f64,
}

impl LossSpec for Rotation {
    fn loss(&self, _net: &SpringNetwork, initial: &SimState, last: &SimState) -> f64 {
        match (&initial.body, &last.body) {
            (Some(a), Some(b)) => (b.angle - a.angle - self.target).abs(),
            _ => self.target.abs(),
        }
    }

    fn backprop(
        &self,
        _net: &SpringNetwork,
        initial: &SimState,
        last: &SimState,
        seed: f64,
        g_initial: &mut StateAdjoint,
        g_last: &mut StateAdjoint,
    ) {
        if let (Some(a), Some(b)) = (&initial.body, &last.body) {
            let sign = (b.angle - a.angle - self.target).signum();
            g_last.body.angle += seed * sign;
            g_initial.body.angle -= seed * sign;
        }
    }
}
