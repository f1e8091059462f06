//! Empirical neural tangent kernels, conditioning and linearized evolution.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::autodiff::{DerivOrder, Jet};
use crate::error::{param_err, Error, Result};
use crate::networks::{init_params, Ansatz, InitScheme, NetworkSpec};
use crate::problems::{ProblemKind, ProblemSpec};

/// Relative eigenvalue floor below which a kernel counts as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-14;

const NTK_STREAM: u64 = 5;

/// `Theta = G G^T` over a sample set, tagged with the training iteration.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub matrix: Array2<f64>,
    pub points: Array2<f64>,
    pub iteration: usize,
}

impl KernelMatrix {
    pub fn from_jacobian(jacobian: &Array2<f64>, points: Array2<f64>) -> Self {
        let mut matrix = jacobian.dot(&jacobian.t());
        symmetrize(&mut matrix);
        KernelMatrix { matrix, points, iteration: 0 }
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// `max |K - K^T| / max |K|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = (&self.matrix - &self.matrix.t()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

fn symmetrize(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
}

fn check_points(points: &Array2<f64>, dim: usize) -> Result<()> {
    if points.nrows() == 0 {
        return Err(param_err("kernel sample set is empty"));
    }
    if points.ncols() != dim {
        return Err(Error::Dimension { expected: dim, got: points.ncols() });
    }
    Ok(())
}

/// Rows `grad_theta phi(x_i)`.
pub fn jacobian(ansatz: &Ansatz, points: &Array2<f64>) -> Result<Array2<f64>> {
    check_points(points, ansatz.input_dim())?;
    let graph = ansatz.graph();
    let p = graph.param_count();
    let d = ansatz.input_dim();
    let mut g = Array2::zeros((points.nrows(), p));
    for (i, x) in points.rows().into_iter().enumerate() {
        let trace = graph.forward(x.insert_axis(ndarray::Axis(0)), DerivOrder::Value, true)?;
        g.row_mut(i).assign(&Array1::from(trace.backward(&[Jet::constant(1.0, d)])?));
    }
    Ok(g)
}

/// Rows `grad_theta (D u)(x_i)` for the problem's residual operator.
pub fn residual_jacobian(problem: &ProblemSpec, ansatz: &Ansatz, points: &Array2<f64>) -> Result<Array2<f64>> {
    check_points(points, problem.dim())?;
    let graph = ansatz.graph();
    let op = &problem.operator;
    let mut g = Array2::zeros((points.nrows(), graph.param_count()));
    for (i, x) in points.rows().into_iter().enumerate() {
        let trace = graph.forward(x.insert_axis(ndarray::Axis(0)), op.order(), true)?;
        let seed = op.seed(&x.to_vec(), &trace.jet(0));
        g.row_mut(i).assign(&Array1::from(trace.backward(&[seed])?));
    }
    Ok(g)
}

pub fn ntk_regression(ansatz: &Ansatz, points: &Array2<f64>) -> Result<KernelMatrix> {
    Ok(KernelMatrix::from_jacobian(&jacobian(ansatz, points)?, points.clone()))
}

pub fn ntk_pde(problem: &ProblemSpec, ansatz: &Ansatz, points: &Array2<f64>) -> Result<KernelMatrix> {
    Ok(KernelMatrix::from_jacobian(&residual_jacobian(problem, ansatz, points)?, points.clone()))
}

/// Extreme eigenvalues and their ratio. Degenerate kernels carry `kappa = inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conditioning {
    pub kappa: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub degenerate: bool,
}

pub fn eigenvalues(matrix: &Array2<f64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::Dimension { expected: n.max(1), got: matrix.ncols() });
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow("non-finite kernel entry".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| matrix[[i, j]]);
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn condition_number(kernel: &KernelMatrix) -> Result<Conditioning> {
    conditioning_of(&kernel.matrix)
}

pub fn conditioning_of(matrix: &Array2<f64>) -> Result<Conditioning> {
    let ev = eigenvalues(matrix)?;
    let (lambda_min, lambda_max) = (ev[0], ev[ev.len() - 1]);
    let degenerate = lambda_max <= 0.0 || lambda_min <= DEGENERACY_RATIO * lambda_max;
    let kappa = if degenerate { f64::INFINITY } else { lambda_max / lambda_min };
    Ok(Conditioning { kappa, lambda_max, lambda_min, degenerate })
}

/// Kernel row block `Theta(x, X)` and initial outputs at off-sample points.
#[derive(Debug, Clone)]
pub struct OffSample {
    pub cross_kernel: Array2<f64>,
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvolutionQuery {
    pub kernel: Array2<f64>,
    pub initial: Vec<f64>,
    pub targets: Vec<f64>,
    pub time: f64,
    pub off_sample: Option<OffSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub on_sample: Vec<f64>,
    pub off_sample: Option<Vec<f64>>,
}

/// Closed-form linearized gradient flow `d phi/dt = -Theta (phi - Y)`.
pub fn linearized_evolution(q: &EvolutionQuery) -> Result<Evolution> {
    let n = q.kernel.nrows();
    if q.kernel.ncols() != n {
        return Err(Error::Dimension { expected: n, got: q.kernel.ncols() });
    }
    for len in [q.initial.len(), q.targets.len()] {
        if len != n {
            return Err(Error::Dimension { expected: n, got: len });
        }
    }
    if !(q.time >= 0.0) || !q.time.is_finite() {
        return Err(param_err(format!("evolution time must be finite and nonnegative, got {}", q.time)));
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (q.kernel[[i, j]] + q.kernel[[j, i]]));
    let eig = SymmetricEigen::new(m);
    let v = &eig.eigenvectors;
    let residual = nalgebra::DVector::from_iterator(n, q.initial.iter().zip(&q.targets).map(|(p, y)| p - y));
    // coefficients of phi0 - Y in the eigenbasis
    let coeff = v.transpose() * &residual;
    let decay = nalgebra::DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| (-l * q.time).exp()));
    let progress = decay.map(|e| 1.0 - e);
    let moved = v * coeff.component_mul(&progress);
    let on_sample = (0..n).map(|i| q.initial[i] - moved[i]).collect();

    let off_sample = match &q.off_sample {
        None => None,
        Some(off) => {
            let rows = off.cross_kernel.nrows();
            if off.cross_kernel.ncols() != n {
                return Err(Error::Dimension { expected: n, got: off.cross_kernel.ncols() });
            }
            if off.initial.len() != rows {
                return Err(Error::Dimension { expected: rows, got: off.initial.len() });
            }
            let lmax = eig.eigenvalues.max();
            let lmin = eig.eigenvalues.min();
            if lmax <= 0.0 || lmin <= DEGENERACY_RATIO * lmax {
                return Err(Error::DegenerateKernel { lambda_min: lmin, lambda_max: lmax });
            }
            // Theta^-1 (I - e^{-Theta t}) (Y - phi0)
            let weights = eig.eigenvalues.iter().zip(progress.iter()).map(|(&l, &p)| -p / l);
            let w = v * coeff.component_mul(&nalgebra::DVector::from_iterator(n, weights));
            Some(
                (0..rows)
                    .map(|r| off.initial[r] + (0..n).map(|j| off.cross_kernel[[r, j]] * w[j]).sum::<f64>())
                    .collect(),
            )
        }
    };
    Ok(Evolution { on_sample, off_sample })
}

/// Conditioning of one network family across seeds.
#[derive(Debug, Clone, Serialize)]
pub struct ConditioningSummary {
    pub kappa: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub seeds: Vec<u64>,
    pub sample_count: usize,
    pub per_seed: Vec<Conditioning>,
    pub degenerate: bool,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl ConditioningSummary {
    /// Medians over per-seed results listed in `seeds` order.
    pub fn from_runs(seeds: &[u64], sample_count: usize, per_seed: Vec<Conditioning>) -> Result<Self> {
        if seeds.is_empty() || seeds.len() != per_seed.len() {
            return Err(param_err("need one conditioning result per seed"));
        }
        let pick = |f: fn(&Conditioning) -> f64| median(&per_seed.iter().map(f).collect::<Vec<_>>());
        Ok(ConditioningSummary {
            kappa: pick(|c| c.kappa),
            lambda_max: pick(|c| c.lambda_max),
            lambda_min: pick(|c| c.lambda_min),
            degenerate: per_seed.iter().any(|c| c.degenerate),
            seeds: seeds.to_vec(),
            sample_count,
            per_seed,
        })
    }
}

/// Kernel conditioning of one freshly initialized network: the PDE kernel
/// of the boundary-wrapped network for PDE problems, the regression kernel
/// of the plain network otherwise.
pub fn conditioning_at_init(
    problem: &ProblemSpec,
    spec: &NetworkSpec,
    scheme: InitScheme,
    seed: u64,
    samples: usize,
) -> Result<Conditioning> {
    let net = init_params(spec, seed, scheme)?;
    let points = problem.sampler(seed).with_stream(NTK_STREAM).interior(samples);
    let kernel = match problem.kind {
        ProblemKind::Pde => {
            let wrap =
                problem.wrap.clone().ok_or_else(|| param_err(format!("{} has no boundary wrap", problem.name)))?;
            ntk_pde(problem, &Ansatz { net, wrap: Some(wrap) }, &points)?
        }
        ProblemKind::Regression => ntk_regression(&Ansatz::plain(net), &points)?,
    };
    condition_number(&kernel)
}

/// PDE kernel conditioning for freshly initialized, boundary-wrapped networks.
pub fn pde_conditioning_at_init(
    problem: &ProblemSpec,
    spec: &NetworkSpec,
    scheme: InitScheme,
    seeds: &[u64],
    samples: usize,
) -> Result<ConditioningSummary> {
    if seeds.is_empty() {
        return Err(param_err("at least one seed is required"));
    }
    if problem.kind != ProblemKind::Pde {
        return Err(param_err(format!("{} is not a PDE problem", problem.name)));
    }
    let per_seed = seeds
        .iter()
        .map(|&seed| conditioning_at_init(problem, spec, scheme, seed, samples))
        .collect::<Result<Vec<_>>>()?;
    ConditioningSummary::from_runs(seeds, samples, per_seed)
}
