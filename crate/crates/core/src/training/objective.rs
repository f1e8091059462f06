//! Training objectives over an ansatz.

use ndarray::{Array2, ArrayView2, Axis};

use super::{relative_l2, TrainConfig};
use crate::autodiff::{DerivOrder, Jet};
use crate::error::{param_err, Result};
use crate::networks::Ansatz;
use crate::problems::{psnr, DomainSampler, ProblemKind, ProblemSpec, Psnr, SignalDataset};

const TRAIN_STREAM: u64 = 2;
const TEST_STREAM: u64 = 3;
const BOUNDARY_STREAM: u64 = 4;

/// A differentiable training target with a held-out error.
pub trait Objective {
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<()>;
    /// Loss and gradient at the current parameters on a freshly drawn sample.
    fn loss_and_gradient(&mut self) -> Result<(f64, Vec<f64>)>;
    /// Relative L2 error on the fixed test set.
    fn test_error(&self) -> Result<f64>;
}

/// `(1/N) sum (D u - f)^2 + (lambda/M) sum (u - g)^2` with fresh interior
/// (and boundary) samples every call.
pub struct PdeObjective {
    pub problem: ProblemSpec,
    pub ansatz: Ansatz,
    samples: usize,
    boundary_samples: usize,
    penalty: f64,
    sampler: DomainSampler,
    boundary_sampler: DomainSampler,
    test_points: Array2<f64>,
    test_exact: Vec<f64>,
}

impl PdeObjective {
    pub fn new(problem: ProblemSpec, ansatz: Ansatz, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        if problem.kind != ProblemKind::Pde {
            return Err(param_err(format!("{} is not a PDE problem", problem.name)));
        }
        if ansatz.input_dim() != problem.dim() {
            return Err(crate::Error::Dimension { expected: problem.dim(), got: ansatz.input_dim() });
        }
        let test_points = problem.sampler(seed).with_stream(TEST_STREAM).interior(cfg.test_samples);
        let test_exact = problem.exact_values(&test_points);
        Ok(PdeObjective {
            sampler: problem.sampler(seed).with_stream(TRAIN_STREAM),
            boundary_sampler: problem.sampler(seed).with_stream(BOUNDARY_STREAM),
            samples: cfg.samples,
            boundary_samples: cfg.boundary_samples,
            penalty: cfg.penalty,
            problem,
            ansatz,
            test_points,
            test_exact,
        })
    }

    pub fn test_points(&self) -> &Array2<f64> {
        &self.test_points
    }
}

impl Objective for PdeObjective {
    fn params(&self) -> Vec<f64> {
        self.ansatz.net.trainable_vector()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.ansatz.net.set_trainable_vector(params)
    }

    fn loss_and_gradient(&mut self) -> Result<(f64, Vec<f64>)> {
        let pts = self.sampler.interior(self.samples);
        if self.boundary_samples > 0 && self.penalty > 0.0 {
            let bpts = self.boundary_sampler.boundary(self.boundary_samples);
            pde_loss_and_gradient(&self.problem, &self.ansatz, &pts, Some((&bpts, self.penalty)))
        } else {
            pde_loss_and_gradient(&self.problem, &self.ansatz, &pts, None)
        }
    }

    fn test_error(&self) -> Result<f64> {
        relative_l2(&self.ansatz.eval_batch(&self.test_points)?, &self.test_exact)
    }
}

/// Rows per forward/backward pass; keeps the traces cache-resident.
const CHUNK: usize = 64;

fn row_chunks(points: &Array2<f64>) -> impl Iterator<Item = ArrayView2<'_, f64>> {
    points.axis_chunks_iter(Axis(0), CHUNK)
}

fn accumulate(total: &mut Vec<f64>, part: Vec<f64>) {
    if total.is_empty() {
        *total = part;
    } else {
        for (g, p) in total.iter_mut().zip(part) {
            *g += p;
        }
    }
}

/// PDE loss and its parameter gradient on given points.
pub fn pde_loss_and_gradient(
    problem: &ProblemSpec,
    ansatz: &Ansatz,
    interior: &Array2<f64>,
    boundary: Option<(&Array2<f64>, f64)>,
) -> Result<(f64, Vec<f64>)> {
    let op = &problem.operator;
    let graph = ansatz.graph();
    let n = interior.nrows() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::new();
    for chunk in row_chunks(interior) {
        let trace = graph.forward(chunk, op.order(), true)?;
        let seeds: Vec<Jet> = chunk
            .rows()
            .into_iter()
            .zip(trace.jets())
            .map(|(x, j)| {
                let x = x.to_vec();
                let r = op.apply(&x, &j) - (problem.rhs)(&x);
                loss += r * r;
                op.seed(&x, &j).scale(2.0 * r / n)
            })
            .collect();
        accumulate(&mut grad, trace.backward(&seeds)?);
    }
    loss /= n;
    if let Some((bpts, lambda)) = boundary {
        let m = bpts.nrows() as f64;
        let d = problem.dim();
        let mut bloss = 0.0;
        for chunk in row_chunks(bpts) {
            let bt = graph.forward(chunk, DerivOrder::Value, true)?;
            let seeds: Vec<Jet> = chunk
                .rows()
                .into_iter()
                .zip(bt.values())
                .map(|(x, u)| {
                    let r = u - problem.exact_value(&x.to_vec());
                    bloss += r * r;
                    Jet::constant(2.0 * lambda * r / m, d)
                })
                .collect();
            accumulate(&mut grad, bt.backward(&seeds)?);
        }
        loss += lambda * bloss / m;
    }
    if grad.is_empty() {
        grad = vec![0.0; ansatz.net.trainable_vector().len()];
    }
    Ok((loss, grad))
}

/// `(1/2N) sum (phi - y)^2` against a regression problem's target.
pub struct RegressionObjective {
    pub problem: ProblemSpec,
    pub ansatz: Ansatz,
    samples: usize,
    sampler: DomainSampler,
    test_points: Array2<f64>,
    test_exact: Vec<f64>,
}

impl RegressionObjective {
    pub fn new(problem: ProblemSpec, ansatz: Ansatz, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        if ansatz.input_dim() != problem.dim() {
            return Err(crate::Error::Dimension { expected: problem.dim(), got: ansatz.input_dim() });
        }
        let test_points = problem.sampler(seed).with_stream(TEST_STREAM).interior(cfg.test_samples);
        let test_exact = problem.exact_values(&test_points);
        Ok(RegressionObjective {
            sampler: problem.sampler(seed).with_stream(TRAIN_STREAM),
            samples: cfg.samples,
            problem,
            ansatz,
            test_points,
            test_exact,
        })
    }
}

/// Regression loss `(1/2N) sum (phi - y)^2` and its parameter gradient.
pub fn regression_loss_and_gradient(ansatz: &Ansatz, pts: &Array2<f64>, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if targets.len() != pts.nrows() {
        return Err(crate::Error::Dimension { expected: pts.nrows(), got: targets.len() });
    }
    let graph = ansatz.graph();
    let n = targets.len() as f64;
    let d = ansatz.input_dim().min(crate::autodiff::MAX_DIM);
    let mut loss = 0.0;
    let mut grad = Vec::new();
    for (chunk, ys) in row_chunks(pts).zip(targets.chunks(CHUNK)) {
        let trace = graph.forward(chunk, DerivOrder::Value, true)?;
        let seeds: Vec<Jet> = trace
            .values()
            .iter()
            .zip(ys)
            .map(|(p, y)| {
                let r = p - y;
                loss += r * r;
                Jet::constant(r / n, d)
            })
            .collect();
        accumulate(&mut grad, trace.backward(&seeds)?);
    }
    if grad.is_empty() {
        grad = vec![0.0; ansatz.net.trainable_vector().len()];
    }
    Ok((loss / (2.0 * n), grad))
}

impl Objective for RegressionObjective {
    fn params(&self) -> Vec<f64> {
        self.ansatz.net.trainable_vector()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.ansatz.net.set_trainable_vector(params)
    }

    fn loss_and_gradient(&mut self) -> Result<(f64, Vec<f64>)> {
        let pts = self.sampler.interior(self.samples);
        let targets = self.problem.rhs_values(&pts);
        regression_loss_and_gradient(&self.ansatz, &pts, &targets)
    }

    fn test_error(&self) -> Result<f64> {
        relative_l2(&self.ansatz.eval_batch(&self.test_points)?, &self.test_exact)
    }
}

/// Full-batch fit of a coordinate network to a signal.
pub struct SignalObjective {
    pub dataset: SignalDataset,
    pub ansatz: Ansatz,
}

impl SignalObjective {
    pub fn new(dataset: SignalDataset, ansatz: Ansatz) -> Result<Self> {
        if ansatz.input_dim() != dataset.dim() {
            return Err(crate::Error::Dimension { expected: dataset.dim(), got: ansatz.input_dim() });
        }
        Ok(SignalObjective { dataset, ansatz })
    }

    pub fn predictions(&self) -> Result<Vec<f64>> {
        self.ansatz.eval_batch(&self.dataset.coords)
    }

    pub fn psnr(&self) -> Result<Psnr> {
        psnr(&self.predictions()?, &self.dataset)
    }
}

impl Objective for SignalObjective {
    fn params(&self) -> Vec<f64> {
        self.ansatz.net.trainable_vector()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.ansatz.net.set_trainable_vector(params)
    }

    fn loss_and_gradient(&mut self) -> Result<(f64, Vec<f64>)> {
        regression_loss_and_gradient(&self.ansatz, &self.dataset.coords, &self.dataset.values)
    }

    fn test_error(&self) -> Result<f64> {
        relative_l2(&self.predictions()?, &self.dataset.values)
    }
}
