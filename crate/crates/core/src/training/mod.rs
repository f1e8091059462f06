//! Losses, Adam, learning-rate schedules and the resampling training loop.

mod adam;
mod metrics;
mod objective;

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::networks::Ansatz;
use crate::problems::ProblemSpec;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use metrics::{Metrics, Record};
pub use objective::{
    pde_loss_and_gradient, regression_loss_and_gradient, Objective, PdeObjective, RegressionObjective, SignalObjective,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `lr * decay^floor(n / decay_every)`
    #[default]
    Step,
    /// `lr * (1 + cos(pi n / iterations)) / 2`
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Interior samples drawn per iteration.
    pub samples: usize,
    /// Boundary samples per iteration for the penalty term.
    pub boundary_samples: usize,
    #[serde(rename = "lambda", alias = "penalty")]
    pub penalty: f64,
    pub lr: f64,
    #[serde(rename = "q", alias = "decay")]
    pub decay: f64,
    #[serde(rename = "s", alias = "decay_every")]
    pub decay_every: usize,
    pub schedule: Schedule,
    pub window: usize,
    /// Size of the fixed held-out test set.
    pub test_samples: usize,
    pub adam: AdamConfig,
    /// Record wall-clock milliseconds in the curve (breaks byte-identical reruns).
    pub record_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 10_000,
            samples: 1000,
            boundary_samples: 0,
            penalty: 0.0,
            lr: 1e-3,
            decay: 0.95,
            decay_every: 100,
            schedule: Schedule::Step,
            window: 100,
            test_samples: 1000,
            adam: AdamConfig::default(),
            record_time: false,
        }
    }
}

impl TrainConfig {
    /// Returns the key and reason of the first invalid field.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.samples < 1 {
            return Err(("samples", "must be at least 1".into()));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(("q", format!("must lie in (0, 1], got {}", self.decay)));
        }
        if self.decay_every < 1 {
            return Err(("s", "must be at least 1".into()));
        }
        if !(self.penalty >= 0.0) {
            return Err(("lambda", format!("must be >= 0, got {}", self.penalty)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(("lr", format!("must be positive, got {}", self.lr)));
        }
        if self.window < 1 {
            return Err(("window", "must be at least 1".into()));
        }
        if self.test_samples < 1 {
            return Err(("test_samples", "must be at least 1".into()));
        }
        let AdamConfig { beta1, beta2, eps } = self.adam;
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
            return Err(("adam", "betas must lie in [0, 1) and eps must be positive".into()));
        }
        Ok(())
    }
}

/// Learning rate at iteration `n`.
pub fn lr_at(n: usize, cfg: &TrainConfig) -> f64 {
    match cfg.schedule {
        Schedule::Step => cfg.lr * cfg.decay.powi((n / cfg.decay_every) as i32),
        Schedule::Cosine => {
            let t = (n as f64 / cfg.iterations.max(1) as f64).min(1.0);
            cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        }
    }
}

/// `sqrt(sum (u - u_hat)^2 / sum u^2)`.
pub fn relative_l2(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension { expected: truth.len(), got: predicted.len() });
    }
    let den: f64 = truth.iter().map(|u| u * u).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric("relative L2 error of an all-zero reference".into()));
    }
    let num: f64 = predicted.iter().zip(truth).map(|(p, u)| (u - p).powi(2)).sum();
    Ok((num / den).sqrt())
}

/// `(1/2N) sum (phi - y)^2` from predictions.
pub fn regression_loss_values(predicted: &[f64], targets: &[f64]) -> Result<f64> {
    if predicted.len() != targets.len() {
        return Err(Error::Dimension { expected: targets.len(), got: predicted.len() });
    }
    if targets.is_empty() {
        return Err(param_err("empty sample set"));
    }
    let n = targets.len() as f64;
    Ok(predicted.iter().zip(targets).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / (2.0 * n))
}

pub fn regression_loss(ansatz: &Ansatz, points: &Array2<f64>, targets: &[f64]) -> Result<f64> {
    regression_loss_values(&ansatz.eval_batch(points)?, targets)
}

/// `(1/N) sum r_i^2 + (lambda/M) sum b_j^2` from residuals.
pub fn pde_loss_values(interior: &[f64], boundary: Option<(&[f64], f64)>) -> Result<f64> {
    if interior.is_empty() {
        return Err(param_err("empty sample set"));
    }
    let mut loss = interior.iter().map(|r| r * r).sum::<f64>() / interior.len() as f64;
    if let Some((b, lambda)) = boundary {
        if !b.is_empty() {
            loss += lambda * b.iter().map(|r| r * r).sum::<f64>() / b.len() as f64;
        }
    }
    Ok(loss)
}

/// PDE least-squares loss; the boundary term compares the ansatz with the
/// exact solution at `boundary` points.
pub fn pde_loss(
    problem: &ProblemSpec,
    ansatz: &Ansatz,
    interior: &Array2<f64>,
    boundary: Option<(&Array2<f64>, f64)>,
) -> Result<f64> {
    let r = problem.residuals(ansatz, interior)?;
    let b = match boundary {
        Some((pts, lambda)) => {
            let u = ansatz.eval_batch(pts)?;
            let g = problem.exact_values(pts);
            Some((u.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>(), lambda))
        }
        None => None,
    };
    pde_loss_values(&r, b.as_ref().map(|(v, l)| (v.as_slice(), *l)))
}

/// Final state of a run; `abort` holds the iteration and error that stopped
/// it early.
#[derive(Debug)]
pub struct TrainOutcome {
    pub params: Vec<f64>,
    pub metrics: Metrics,
    pub abort: Option<(usize, Error)>,
}

/// Runs Adam on `objective`: every iteration draws fresh samples, records the
/// loss and the held-out error of the current parameters, then steps.
pub fn train_loop<O: Objective + ?Sized>(objective: &mut O, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate().map_err(|(k, m)| param_err(format!("{k} {m}")))?;
    let mut params = objective.params();
    let mut adam = AdamState::new(params.len(), cfg.adam)?;
    let mut metrics = Metrics::new(cfg.window);
    let start = Instant::now();
    for n in 0..cfg.iterations {
        let lr = lr_at(n, cfg);
        let step = objective.loss_and_gradient().and_then(|(loss, grad)| {
            if !loss.is_finite() {
                return Err(Error::NumericOverflow(format!("loss became {loss}")));
            }
            let rel_l2 = objective.test_error()?;
            Ok((loss, grad, rel_l2))
        });
        let (loss, grad, rel_l2) = match step {
            Ok(v) => v,
            Err(e) => return Ok(TrainOutcome { params, metrics, abort: Some((n, e)) }),
        };
        let elapsed_ms = if cfg.record_time { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        metrics.push(Record { iter: n, loss, rel_l2, lr, elapsed_ms });
        let mut next = params.clone();
        if let Err(e) = adam_step(&mut adam, &mut next, &grad, lr).and_then(|()| objective.set_params(&next)) {
            return Ok(TrainOutcome { params, metrics, abort: Some((n, e)) });
        }
        params = next;
    }
    Ok(TrainOutcome { params, metrics, abort: None })
}

#[cfg(test)]
mod tests;
