use serde::{Deserialize, Serialize};

/// Time-varying rest-length scale `a(t)`: an actuated spring's target length
/// is `rest_length · (1 + a(t))`.
pub trait Actuation: Sync {
    fn num_params(&self) -> usize;
    /// Writes `a_s(t)` for every spring (0 for passive springs).
    fn fill(&self, t: f64, out: &mut [f64]);
    /// Accumulates `Σ_s d_scale[s] · ∂a_s(t)/∂θ` into `grad`.
    fn backprop(&self, t: f64, d_scale: &[f64], grad: &mut [f64]);
}

pub struct NoActuation;

impl Actuation for NoActuation {
    fn num_params(&self) -> usize {
        0
    }
    fn fill(&self, _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
    fn backprop(&self, _t: f64, _d: &[f64], _grad: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineGroup {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// `a(t) = A_g · sin(ω_g t + φ_g)` shared by every spring of actuator group g.
/// Parameters are laid out as `[A_0, ω_0, φ_0, A_1, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinusoid {
    pub groups: Vec<SineGroup>,
    pub spring_group: Vec<Option<usize>>,
}

impl Actuation for Sinusoid {
    fn num_params(&self) -> usize {
        3 * self.groups.len()
    }

    fn fill(&self, t: f64, out: &mut [f64]) {
        let vals: Vec<f64> =
            self.groups.iter().map(|g| g.amplitude * (g.frequency * t + g.phase).sin()).collect();
        for (o, g) in out.iter_mut().zip(&self.spring_group) {
            *o = g.map_or(0.0, |g| vals[g]);
        }
    }

    fn backprop(&self, t: f64, d_scale: &[f64], grad: &mut [f64]) {
        let mut acc = vec![0.0; self.groups.len()];
        for (d, g) in d_scale.iter().zip(&self.spring_group) {
            if let Some(g) = g {
                acc[*g] += d;
            }
        }
        for (k, (g, d)) in self.groups.iter().zip(acc).enumerate() {
            if d == 0.0 {
                continue;
            }
            let (s, c) = (g.frequency * t + g.phase).sin_cos();
            grad[3 * k] += d * s;
            grad[3 * k + 1] += d * g.amplitude * t * c;
            grad[3 * k + 2] += d * g.amplitude * c;
        }
    }
}

/// Piecewise-constant curvature commands.
///
/// `values[channel · knots + k]` is the curvature of `channel` at knot `k`.
/// The first `active_until` seconds are divided into `segment_knot.len()`
/// equal segments, segment `j` using knot `segment_knot[j]`; afterwards the
/// last segment's knot holds. Spring `s` follows `sign · curvature` of its
/// channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSchedule {
    pub knots: usize,
    pub values: Vec<f64>,
    pub segment_knot: Vec<usize>,
    pub active_until: f64,
    pub spring_channel: Vec<Option<(usize, f64)>>,
}

impl CurvatureSchedule {
    pub fn knot_at(&self, t: f64) -> usize {
        let nseg = self.segment_knot.len();
        let seg = if t >= self.active_until {
            nseg - 1
        } else {
            ((t / self.active_until * nseg as f64).floor() as usize).min(nseg - 1)
        };
        self.segment_knot[seg]
    }
}

impl Actuation for CurvatureSchedule {
    fn num_params(&self) -> usize {
        self.values.len()
    }

    fn fill(&self, t: f64, out: &mut [f64]) {
        let k = self.knot_at(t);
        for (o, ch) in out.iter_mut().zip(&self.spring_channel) {
            *o = ch.map_or(0.0, |(c, sign)| sign * self.values[c * self.knots + k]);
        }
    }

    fn backprop(&self, t: f64, d_scale: &[f64], grad: &mut [f64]) {
        let k = self.knot_at(t);
        for (d, ch) in d_scale.iter().zip(&self.spring_channel) {
            if let Some((c, sign)) = ch {
                grad[c * self.knots + k] += sign * d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_gradient_matches_differences() {
        let mut act = Sinusoid {
            groups: vec![SineGroup { amplitude: 0.2, frequency: 7.0, phase: 0.4 }],
            spring_group: vec![Some(0), None, Some(0)],
        };
        let t = 0.37;
        let d = [0.5, 3.0, -1.5];
        let mut grad = vec![0.0; 3];
        act.backprop(t, &d, &mut grad);
        let eval = |a: &Sinusoid| {
            let mut out = [0.0; 3];
            a.fill(t, &mut out);
            out.iter().zip(&d).map(|(o, w)| o * w).sum::<f64>()
        };
        let h = 1e-6;
        for p in 0..3 {
            let bump = |a: &mut Sinusoid, v: f64| match p {
                0 => a.groups[0].amplitude += v,
                1 => a.groups[0].frequency += v,
                _ => a.groups[0].phase += v,
            };
            bump(&mut act, h);
            let up = eval(&act);
            bump(&mut act, -2.0 * h);
            let dn = eval(&act);
            bump(&mut act, h);
            assert!(((up - dn) / (2.0 * h) - grad[p]).abs() < 1e-8);
        }
    }

    #[test]
    fn curvature_knots_follow_segments() {
        let sched = CurvatureSchedule {
            knots: 3,
            values: vec![0.1, 0.2, 0.3],
            segment_knot: vec![0, 0, 1, 1, 2],
            active_until: 1.0,
            spring_channel: vec![Some((0, -1.0)), Some((0, 1.0))],
        };
        assert_eq!(sched.knot_at(0.0), 0);
        assert_eq!(sched.knot_at(0.45), 1);
        assert_eq!(sched.knot_at(0.99), 2);
        assert_eq!(sched.knot_at(5.0), 2);
        let mut out = [0.0; 2];
        sched.fill(0.5, &mut out);
        assert_eq!(out, [-0.2, 0.2]);
    }
}
