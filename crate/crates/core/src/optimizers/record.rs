use serde::{Deserialize, Serialize};

/// One optimizer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Restart this iteration belongs to (0 outside the restart loop).
    pub restart: usize,
    /// Cumulative evaluations after this iteration.
    pub evaluations: usize,
    /// Running minimum over the whole run.
    pub best_loss: f64,
    pub iteration_best_loss: f64,
    /// Best point evaluated in this iteration, in box coordinates.
    pub iteration_best_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub evaluation: usize,
    pub loss: f64,
    pub x: Vec<f64>,
}

/// Everything logged about one optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub iterations: Vec<IterationRecord>,
    pub points: Option<Vec<PointRecord>>,
    pub events: Vec<String>,
    pub best_loss: f64,
    pub best_x: Vec<f64>,
}

impl RunRecord {
    pub fn new(algorithm: &str, seed: u64, config: serde_json::Value, log_points: bool) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            seed,
            config,
            iterations: Vec::new(),
            points: log_points.then(Vec::new),
            events: Vec::new(),
            best_loss: f64::INFINITY,
            best_x: Vec::new(),
        }
    }

    pub fn evaluations(&self) -> usize {
        self.iterations.last().map_or(0, |it| it.evaluations)
    }

    pub fn best_curve(&self) -> Vec<f64> {
        self.iterations.iter().map(|it| it.best_loss).collect()
    }

    /// Appends one iteration's evaluated points.
    pub fn push(&mut self, restart: usize, evaluated: &[(Vec<f64>, f64)]) {
        let start = self.evaluations();
        let mut it_best = 0;
        for (k, (x, loss)) in evaluated.iter().enumerate() {
            if *loss < evaluated[it_best].1 {
                it_best = k;
            }
            if let Some(p) = &mut self.points {
                p.push(PointRecord { evaluation: start + k, loss: *loss, x: x.clone() });
            }
        }
        let (x, loss) = evaluated.get(it_best).cloned().unwrap_or((Vec::new(), f64::INFINITY));
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_x = x.clone();
        }
        self.iterations.push(IterationRecord {
            iteration: self.iterations.len(),
            restart,
            evaluations: start + evaluated.len(),
            best_loss: self.best_loss,
            iteration_best_loss: loss,
            iteration_best_x: x,
        });
    }
}
