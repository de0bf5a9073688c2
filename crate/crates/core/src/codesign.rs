//! Co-design vectors, their bounds, and the task contract.
//!
//! A task owns a [`ParameterSpace`] in physical ("task") units. Optimizers and
//! the landscape analysis work in the normalized unit box `[0, 1]^m`; the
//! [`BoxView`] adapter does the mapping and turns task failures into sentinel
//! samples so population methods keep running.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Morphology,
    Control,
}

/// Dimensions, bounds and morphology/control partition of a co-design vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub m: usize,
    pub m_morph: usize,
    pub m_ctrl: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub baseline: Vec<f64>,
    pub labels: Vec<ParamKind>,
}

/// A point in co-design space, in task units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoDesign {
    pub values: Vec<f64>,
}

impl CoDesign {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Loss (lower is better) and, when requested, its gradient in task units.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub gradient: Option<Vec<f64>>,
}

impl ParameterSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, baseline: Vec<f64>, labels: Vec<ParamKind>) -> Result<Self> {
        let m = lower.len();
        check_len(m, upper.len())?;
        check_len(m, baseline.len())?;
        check_len(m, labels.len())?;
        for i in 0..m {
            if !(lower[i] < upper[i]) {
                return Err(Error::InvalidArgument(format!(
                    "bounds at index {i} are empty: [{}, {}]",
                    lower[i], upper[i]
                )));
            }
            if !(lower[i] <= baseline[i] && baseline[i] <= upper[i]) {
                return Err(Error::InvalidArgument(format!("baseline at index {i} outside bounds")));
            }
        }
        let m_morph = labels.iter().filter(|&&k| k == ParamKind::Morphology).count();
        Ok(Self { m, m_morph, m_ctrl: m - m_morph, lower, upper, baseline, labels })
    }

    /// Symmetric bounds `center · (1 ± rel)` around positive nominal values.
    pub fn relative(nominal: &[f64], rel: &[f64], labels: Vec<ParamKind>) -> Result<Self> {
        check_len(nominal.len(), rel.len())?;
        let lower = nominal.iter().zip(rel).map(|(c, r)| c * (1.0 - r)).collect();
        let upper = nominal.iter().zip(rel).map(|(c, r)| c * (1.0 + r)).collect();
        Self::new(lower, upper, nominal.to_vec(), labels)
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn check(&self, x: &CoDesign) -> Result<()> {
        check_len(self.m, x.len())
    }

    /// Componentwise clamp into `[lower, upper]`.
    pub fn project(&self, x: &CoDesign) -> Result<CoDesign> {
        self.check(x)?;
        let values = x
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| v.clamp(self.lower[i], self.upper[i]))
            .collect();
        Ok(CoDesign { values })
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> CoDesign {
        let values = (0..self.m)
            .map(|i| {
                let u: f64 = rng.random();
                self.lower[i] + u * self.width(i)
            })
            .collect();
        CoDesign { values }
    }

    /// Morphology-tagged and control-tagged entries of `v`, in index order.
    pub fn split(&self, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.m, v.len())?;
        let mut morph = Vec::with_capacity(self.m_morph);
        let mut ctrl = Vec::with_capacity(self.m_ctrl);
        for (&x, kind) in v.iter().zip(&self.labels) {
            match kind {
                ParamKind::Morphology => morph.push(x),
                ParamKind::Control => ctrl.push(x),
            }
        }
        Ok((morph, ctrl))
    }

    /// Inverse of [`split`](Self::split).
    pub fn merge(&self, morph: &[f64], ctrl: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m_morph, morph.len())?;
        check_len(self.m_ctrl, ctrl.len())?;
        let (mut im, mut ic) = (morph.iter(), ctrl.iter());
        Ok(self
            .labels
            .iter()
            .map(|k| match k {
                ParamKind::Morphology => *im.next().unwrap(),
                ParamKind::Control => *ic.next().unwrap(),
            })
            .collect())
    }

    /// `n` isotropic Gaussian draws around `mean`; `sigma` is measured in
    /// unit-box coordinates. Every draw is projected into bounds.
    pub fn perturb_gaussian<R: Rng + ?Sized>(
        &self,
        mean: &CoDesign,
        sigma: f64,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<CoDesign>> {
        if !(sigma > 0.0) || n == 0 {
            return Err(Error::InvalidArgument("perturb_gaussian needs sigma > 0 and n >= 1".into()));
        }
        let center = self.to_box(mean)?;
        Ok((0..n)
            .map(|_| {
                let z: Vec<f64> = center
                    .iter()
                    .map(|&c| {
                        let eta: f64 = StandardNormal.sample(rng);
                        (c + sigma * eta).clamp(0.0, 1.0)
                    })
                    .collect();
                self.from_box(&z)
            })
            .collect())
    }

    pub fn to_box(&self, x: &CoDesign) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.values.iter().enumerate().map(|(i, &v)| (v - self.lower[i]) / self.width(i)).collect())
    }

    pub fn from_box(&self, z: &[f64]) -> CoDesign {
        debug_assert_eq!(z.len(), self.m);
        CoDesign {
            values: z.iter().enumerate().map(|(i, &u)| self.lower[i] + u * self.width(i)).collect(),
        }
    }

    /// Chain rule from a task-unit gradient to a box-coordinate gradient.
    pub fn gradient_to_box(&self, g: &[f64]) -> Vec<f64> {
        g.iter().enumerate().map(|(i, &gi)| gi * self.width(i)).collect()
    }

    pub fn baseline_box(&self) -> Vec<f64> {
        self.to_box(&CoDesign::new(self.baseline.clone())).expect("baseline has length m")
    }
}

/// The uniform contract every co-design task implements.
///
/// Both evaluators are pure functions of their input (and the task's own
/// seed), and must return the same loss for the same input.
pub trait Task: Send + Sync {
    fn name(&self) -> &str;
    fn space(&self) -> &ParameterSpace;
    fn evaluate(&self, x: &CoDesign) -> Result<Evaluation>;
    fn evaluate_with_gradient(&self, x: &CoDesign) -> Result<Evaluation>;
    /// Loss reported for a rollout that diverged.
    fn sentinel_loss(&self) -> f64;
    /// A rollout of `x` kept every `stride` steps, for drawing. Tasks without
    /// a physical scene return `None`.
    fn record(&self, _x: &CoDesign, _stride: usize) -> Result<Option<Recording>> {
        Ok(None)
    }
}

/// A simulated scene ready for export.
#[derive(Debug, Clone)]
pub struct Recording {
    pub network: crate::sim::SpringNetwork,
    pub trajectory: crate::sim::Trajectory,
    pub ellipse_axes: Option<(f64, f64)>,
}

pub type TaskHandle = std::sync::Arc<dyn Task>;

/// Result of evaluating a box-coordinate point.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub loss: f64,
    /// Empty when no gradient was requested.
    pub gradient: Vec<f64>,
    pub failed: bool,
}

/// A loss over the unit box, as consumed by optimizers.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, z: &[f64]) -> Sample;
    fn value_and_gradient(&self, z: &[f64]) -> Sample;
}

/// Unit-box view of a task. Failed evaluations become the task's sentinel
/// loss with a zero gradient.
#[derive(Clone, Copy)]
pub struct BoxView<'a> {
    pub task: &'a dyn Task,
}

impl<'a> BoxView<'a> {
    pub fn new(task: &'a dyn Task) -> Self {
        Self { task }
    }

    fn failed(&self, with_gradient: bool) -> Sample {
        let m = self.task.space().m;
        Sample {
            loss: self.task.sentinel_loss(),
            gradient: if with_gradient { vec![0.0; m] } else { Vec::new() },
            failed: true,
        }
    }
}

impl Objective for BoxView<'_> {
    fn dim(&self) -> usize {
        self.task.space().m
    }

    fn value(&self, z: &[f64]) -> Sample {
        let x = self.task.space().from_box(z);
        match self.task.evaluate(&x) {
            Ok(e) if e.loss.is_finite() => Sample { loss: e.loss, gradient: Vec::new(), failed: false },
            _ => self.failed(false),
        }
    }

    fn value_and_gradient(&self, z: &[f64]) -> Sample {
        let space = self.task.space();
        let x = space.from_box(z);
        match self.task.evaluate_with_gradient(&x) {
            Ok(Evaluation { loss, gradient: Some(g) }) if loss.is_finite() => {
                Sample { loss, gradient: space.gradient_to_box(&g), failed: false }
            }
            _ => self.failed(true),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn unit_space(m: usize, m_morph: usize) -> ParameterSpace {
        let labels = (0..m)
            .map(|i| if i < m_morph { ParamKind::Morphology } else { ParamKind::Control })
            .collect();
        ParameterSpace::new(vec![-1.0; m], vec![2.0; m], vec![0.5; m], labels).unwrap()
    }

    #[test]
    fn rejects_bad_bounds() {
        let labels = vec![ParamKind::Control; 2];
        assert!(ParameterSpace::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 1.0], labels.clone()).is_err());
        assert!(ParameterSpace::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![0.5, 2.0], labels).is_err());
    }

    #[test]
    fn project_identity_and_clamp() {
        let s = unit_space(3, 2);
        let x = CoDesign::new(vec![0.0, 1.0, -0.5]);
        assert_eq!(s.project(&x).unwrap(), x);
        let y = CoDesign::new(vec![3.0, 0.0, 0.0]);
        assert_eq!(s.project(&y).unwrap().values[0], 2.0);
        assert!(matches!(
            s.project(&CoDesign::new(vec![0.0])),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn project_matches_componentwise_loop() {
        let s = unit_space(16, 8);
        let mut rng = substream(3, &[]);
        for _ in 0..50 {
            let x = CoDesign::new((0..16).map(|_| rng.random_range(-5.0..5.0)).collect());
            let p = s.project(&x).unwrap();
            for i in 0..16 {
                let mut e = x.values[i];
                if e < s.lower[i] {
                    e = s.lower[i];
                }
                if e > s.upper[i] {
                    e = s.upper[i];
                }
                assert_eq!(p.values[i], e);
            }
            assert_eq!(s.project(&p).unwrap(), p);
        }
    }

    #[test]
    fn uniform_sampling() {
        let b = 0.3;
        let s = ParameterSpace::new(vec![b - 1e-12], vec![b + 1e-12], vec![b], vec![ParamKind::Control]).unwrap();
        let x = s.sample_uniform(&mut substream(1, &[]));
        assert!((x.values[0] - b).abs() < 1e-11);

        let s = unit_space(2, 1);
        let a = s.sample_uniform(&mut substream(9, &[]));
        let c = s.sample_uniform(&mut substream(9, &[]));
        assert_eq!(a, c);

        let mut rng = substream(2, &[]);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| s.sample_uniform(&mut rng).values[0]).sum::<f64>() / n as f64;
        // uniform on [-1, 2]: sd = 3/sqrt(12)
        let se = 3.0 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn split_examples() {
        let s = unit_space(84, 72);
        let (m, c) = s.split(&vec![0.0; 84]).unwrap();
        assert_eq!((m.len(), c.len()), (72, 12));
        assert!(m.iter().chain(&c).all(|&v| v == 0.0));
        let mut v = vec![0.0; 84];
        v[80] = 1.0;
        let (m, c) = s.split(&v).unwrap();
        assert!(m.iter().all(|&x| x == 0.0));
        assert_eq!(c[8], 1.0);
        assert!(s.split(&[1.0]).is_err());
    }

    #[test]
    fn perturbation() {
        let s = unit_space(84, 72);
        let mean = CoDesign::new(s.baseline.clone());
        let mut rng = substream(4, &[]);
        let pts = s.perturb_gaussian(&mean, 1e-12, 100, &mut rng).unwrap();
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().all(|p| p.len() == 84));
        for p in &pts {
            for (a, b) in p.values.iter().zip(&mean.values) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        assert!(s.perturb_gaussian(&mean, 0.0, 3, &mut rng).is_err());
        assert!(s.perturb_gaussian(&mean, 0.1, 0, &mut rng).is_err());
    }

    #[test]
    fn perturbation_variance_in_box_units() {
        let s = unit_space(1, 0);
        let mean = CoDesign::new(vec![0.5]);
        let sigma = 0.05;
        let n = 100_000;
        let pts = s.perturb_gaussian(&mean, sigma, n, &mut substream(5, &[])).unwrap();
        let z: Vec<f64> = pts.iter().map(|p| s.to_box(p).unwrap()[0]).collect();
        let mu = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "var ratio {}", var / (sigma * sigma));
    }

    #[test]
    fn json_round_trip() {
        let s = unit_space(4, 3);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"m_morph\":3"));
        let back: ParameterSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    proptest::proptest! {
        #[test]
        fn split_merge_round_trip(v in proptest::collection::vec(-1e6f64..1e6, 12)) {
            let s = unit_space(12, 5);
            let (m, c) = s.split(&v).unwrap();
            proptest::prop_assert_eq!(s.merge(&m, &c).unwrap(), v);
        }

        #[test]
        fn project_idempotent(v in proptest::collection::vec(-10f64..10.0, 6)) {
            let s = unit_space(6, 3);
            let p = s.project(&CoDesign::new(v)).unwrap();
            proptest::prop_assert_eq!(s.project(&p).unwrap(), p);
        }
    }
}
