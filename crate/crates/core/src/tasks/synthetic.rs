//! Closed-form test landscapes with exact gradients.

use crate::codesign::{CoDesign, Evaluation, ParamKind, ParameterSpace, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Landscape {
    /// `Σ (x_i − c_i)²`
    Sphere { center: Vec<f64> },
    /// `(xᵀu)²`
    RankOne { u: Vec<f64> },
    /// `Σ h_i x_i²`
    Quadratic { h: Vec<f64> },
    /// `Σ 100 (x_{i+1} − x_i²)² + (1 − x_i)²`
    Rosenbrock,
}

impl Landscape {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Landscape::Sphere { center } => x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum(),
            Landscape::RankOne { u } => x.iter().zip(u).map(|(a, b)| a * b).sum::<f64>().powi(2),
            Landscape::Quadratic { h } => x.iter().zip(h).map(|(a, h)| h * a * a).sum(),
            Landscape::Rosenbrock => {
                x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
            }
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Landscape::Sphere { center } => x.iter().zip(center).map(|(a, c)| 2.0 * (a - c)).collect(),
            Landscape::RankOne { u } => {
                let d: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
                u.iter().map(|b| 2.0 * d * b).collect()
            }
            Landscape::Quadratic { h } => x.iter().zip(h).map(|(a, h)| 2.0 * h * a).collect(),
            Landscape::Rosenbrock => {
                let mut g = vec![0.0; x.len()];
                for i in 0..x.len().saturating_sub(1) {
                    let r = x[i + 1] - x[i] * x[i];
                    g[i] += -400.0 * x[i] * r - 2.0 * (1.0 - x[i]);
                    g[i + 1] += 200.0 * r;
                }
                g
            }
        }
    }
}

/// A [`Landscape`] over a box, with the first `m_morph` coordinates tagged
/// as morphology.
pub struct AnalyticTask {
    name: String,
    landscape: Landscape,
    space: ParameterSpace,
}

impl AnalyticTask {
    pub fn new(name: &str, landscape: Landscape, lower: f64, upper: f64, m: usize, m_morph: usize) -> Result<Self> {
        let dims_ok = match &landscape {
            Landscape::Sphere { center: v } | Landscape::RankOne { u: v } | Landscape::Quadratic { h: v } => v.len() == m,
            Landscape::Rosenbrock => m >= 2,
        };
        if !dims_ok || m_morph > m {
            return Err(Error::InvalidArgument(format!("{name}: inconsistent dimensions")));
        }
        let labels = (0..m).map(|i| if i < m_morph { ParamKind::Morphology } else { ParamKind::Control }).collect();
        let mid = 0.5 * (lower + upper);
        let space = ParameterSpace::new(vec![lower; m], vec![upper; m], vec![mid; m], labels)?;
        Ok(Self { name: name.to_string(), landscape, space })
    }

    pub fn sphere(m: usize) -> Self {
        Self::new(&format!("sphere-{m}"), Landscape::Sphere { center: vec![0.0; m] }, -1.0, 1.0, m, m / 2).expect("valid sphere")
    }

    /// `(xᵀu)²` for a unit vector `u`.
    pub fn rank_one(u: Vec<f64>) -> Result<Self> {
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("direction must be nonzero".into()));
        }
        let m = u.len();
        let u = u.into_iter().map(|a| a / norm).collect();
        Self::new("rank_one", Landscape::RankOne { u }, -1.0, 1.0, m, m / 2)
    }

    pub fn rosenbrock(m: usize) -> Self {
        Self::new(&format!("rosenbrock-{m}"), Landscape::Rosenbrock, -2.0, 2.0, m, m / 2).expect("m >= 2")
    }

    pub fn landscape(&self) -> &Landscape {
        &self.landscape
    }
}

impl Task for AnalyticTask {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&self, x: &CoDesign) -> Result<Evaluation> {
        self.space.check(x)?;
        Ok(Evaluation { loss: self.landscape.value(&x.values), gradient: None })
    }

    fn evaluate_with_gradient(&self, x: &CoDesign) -> Result<Evaluation> {
        self.space.check(x)?;
        Ok(Evaluation { loss: self.landscape.value(&x.values), gradient: Some(self.landscape.gradient(&x.values)) })
    }

    fn sentinel_loss(&self) -> f64 {
        1e30
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::finite_difference_gradient;

    #[test]
    fn gradients_match_differences() {
        let x = [0.3, -0.7, 0.45, 0.1];
        for l in [
            Landscape::Sphere { center: vec![0.1, 0.2, 0.3, 0.4] },
            Landscape::RankOne { u: vec![0.5, 0.5, -0.5, 0.5] },
            Landscape::Quadratic { h: vec![1.0, 2.0, 3.0, 4.0] },
            Landscape::Rosenbrock,
        ] {
            let fd = finite_difference_gradient(|z| Ok(l.value(z)), &x, 1e-6).unwrap();
            for (a, b) in fd.iter().zip(l.gradient(&x)) {
                assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{l:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sphere_gradient_is_twice_x() {
        let t = AnalyticTask::sphere(3);
        let x = CoDesign::new(vec![0.2, -0.4, 0.9]);
        let fd = finite_difference_gradient(|z| Ok(t.evaluate(&CoDesign::new(z.to_vec()))?.loss), &x.values, 1e-5).unwrap();
        for (g, xi) in fd.iter().zip(&x.values) {
            assert!((g - 2.0 * xi).abs() < 1e-8);
        }
    }

    #[test]
    fn rosenbrock_minimum() {
        assert_eq!(Landscape::Rosenbrock.value(&[1.0; 5]), 0.0);
    }
}
