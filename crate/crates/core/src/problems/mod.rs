//! Manufactured-solution PDE problems, regression targets, samplers and
//! signal data.

mod sampler;
mod signal;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DerivOrder, Graph, Jet, JetFn};
use crate::error::{param_err, Error, Result};
use crate::networks::{Ansatz, BoundaryDomain, BoundaryWrap};

pub use sampler::{sample_interior, DomainKind, DomainSampler};
pub use signal::{load_signal, psnr, psnr_from_mse, synthetic_image, Psnr, SignalDataset, SignalFormat};

/// Tolerance of the construction-time check `|D u - f| <= tol`.
pub const SELF_CONSISTENCY_TOL: f64 = 1e-8;
const SELF_CONSISTENCY_POINTS: usize = 1000;
const ORIGIN_EXCLUSION: f64 = 1e-6;

/// One additive term of a differential operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorTerm {
    /// `u`
    Identity,
    /// `-Laplacian u`
    NegLaplacian,
    /// `-div(|x| grad u) = -(|x| Laplacian u + (x / |x|) . grad u)`
    NegDivRadialCoef,
    /// `(u + shift)^2`
    ShiftedSquare { shift: f64 },
}

impl OperatorTerm {
    pub fn order(&self) -> DerivOrder {
        match self {
            OperatorTerm::Identity | OperatorTerm::ShiftedSquare { .. } => DerivOrder::Value,
            OperatorTerm::NegLaplacian | OperatorTerm::NegDivRadialCoef => DerivOrder::Laplacian,
        }
    }

    pub fn apply(&self, x: &[f64], u: &Jet) -> f64 {
        match *self {
            OperatorTerm::Identity => u.value,
            OperatorTerm::NegLaplacian => -u.laplacian(),
            OperatorTerm::NegDivRadialCoef => {
                let r = norm(x);
                let radial: f64 = x.iter().zip(u.gradient()).map(|(xk, gk)| xk * gk).sum::<f64>() / r;
                -(r * u.laplacian() + radial)
            }
            OperatorTerm::ShiftedSquare { shift } => (u.value + shift).powi(2),
        }
    }

    /// Derivative of [`apply`](Self::apply) with respect to each jet entry.
    pub fn seed(&self, x: &[f64], u: &Jet) -> Jet {
        let d = u.dim;
        let mut s = Jet::constant(0.0, d);
        match *self {
            OperatorTerm::Identity => s.value = 1.0,
            OperatorTerm::NegLaplacian => s.diag[..d].fill(-1.0),
            OperatorTerm::NegDivRadialCoef => {
                let r = norm(x);
                for k in 0..d {
                    s.diag[k] = -r;
                    s.grad[k] = -x[k] / r;
                }
            }
            OperatorTerm::ShiftedSquare { shift } => s.value = 2.0 * (u.value + shift),
        }
        s
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sum of operator terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    pub terms: Vec<OperatorTerm>,
}

impl Operator {
    pub fn new(terms: Vec<OperatorTerm>) -> Self {
        Operator { terms }
    }

    pub fn order(&self) -> DerivOrder {
        self.terms.iter().map(OperatorTerm::order).max().unwrap_or(DerivOrder::Value)
    }

    pub fn apply(&self, x: &[f64], u: &Jet) -> f64 {
        self.terms.iter().map(|t| t.apply(x, u)).sum()
    }

    pub fn seed(&self, x: &[f64], u: &Jet) -> Jet {
        let zero = Jet::constant(0.0, u.dim);
        self.terms.iter().fold(zero, |acc, t| acc + t.seed(x, u))
    }

    pub fn is_linear(&self) -> bool {
        !self.terms.iter().any(|t| matches!(t, OperatorTerm::ShiftedSquare { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Pde,
    Regression,
}

/// A problem `D u = f` on a domain with a known exact solution.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: ProblemKind,
    pub domain: DomainKind,
    pub operator: Operator,
    pub exact: JetFn,
    pub rhs: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub wrap: Option<BoundaryWrap>,
    /// Points closer than this to the origin are excluded from sampling.
    pub exclusion: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("domain", &self.domain)
            .field("operator", &self.operator)
            .field("wrap", &self.wrap)
            .finish()
    }
}

pub const CATALOG: [&str; 5] =
    ["poisson-smooth", "low-regularity", "oscillation-6pi", "oscillation-40", "regression-discontinuous"];

/// Looks up a catalog problem and runs its self-consistency check.
pub fn catalog(name: &str) -> Result<ProblemSpec> {
    let spec = match name {
        "poisson-smooth" => poisson_smooth()?,
        "low-regularity" => low_regularity()?,
        "oscillation-6pi" => oscillation(6.0 * PI, name)?,
        "oscillation-40" => oscillation(40.0, name)?,
        "regression-discontinuous" => regression_discontinuous(),
        other => return Err(param_err(format!("unknown problem `{other}`"))),
    };
    spec.check_consistency(0)?;
    Ok(spec)
}

fn poisson_smooth() -> Result<ProblemSpec> {
    let exact: JetFn = Arc::new(|x: &[Jet]| {
        let (a, b) = (x[0], x[1]);
        a * a * (1.0 - a) * b * b * (1.0 - b)
    });
    let rhs = Arc::new(|x: &[f64]| {
        let (a, b) = (x[0], x[1]);
        -((2.0 - 6.0 * a) * b * b * (1.0 - b) + a * a * (1.0 - a) * (2.0 - 6.0 * b))
    });
    Ok(ProblemSpec {
        name: "poisson-smooth".into(),
        kind: ProblemKind::Pde,
        domain: DomainKind::UnitSquare,
        operator: Operator::new(vec![OperatorTerm::NegLaplacian]),
        exact,
        rhs,
        wrap: Some(BoundaryWrap::new(BoundaryDomain::UnitSquare)?),
        exclusion: 0.0,
    })
}

fn low_regularity() -> Result<ProblemSpec> {
    let exact: JetFn = Arc::new(|x: &[Jet]| ((1.0 - Jet::norm(x)) * (2.0 * PI)).sin());
    let rhs = Arc::new(|x: &[f64]| {
        let r = norm(x);
        let t = 2.0 * PI * (1.0 - r);
        4.0 * PI * t.cos() + 4.0 * PI * PI * r * t.sin()
    });
    Ok(ProblemSpec {
        name: "low-regularity".into(),
        kind: ProblemKind::Pde,
        domain: DomainKind::UnitDisc,
        operator: Operator::new(vec![OperatorTerm::NegDivRadialCoef]),
        exact,
        rhs,
        wrap: Some(BoundaryWrap::new(BoundaryDomain::UnitDisc)?),
        exclusion: ORIGIN_EXCLUSION,
    })
}

/// `-Laplacian u + (u + 2)^2 = f` with `u = sin(w x1) sin(w x2)`, so that
/// `f = 2 w^2 u + (u + 2)^2`.
fn oscillation(w: f64, name: &str) -> Result<ProblemSpec> {
    let exact: JetFn = Arc::new(move |x: &[Jet]| (x[0] * w).sin() * (x[1] * w).sin());
    let rhs = Arc::new(move |x: &[f64]| {
        let u = (w * x[0]).sin() * (w * x[1]).sin();
        2.0 * w * w * u + (u + 2.0).powi(2)
    });
    let mut wrap = BoundaryWrap::new(BoundaryDomain::UnitSquare)?;
    let s = w.sin();
    if s.abs() > 1e-12 {
        // u does not vanish on x1 = 1 or x2 = 1; a transfinite lift matches it
        let lift: JetFn = Arc::new(move |x: &[Jet]| {
            x[0] * (x[1] * w).sin() * s + x[1] * (x[0] * w).sin() * s - x[0] * x[1] * (s * s)
        });
        wrap = wrap.with_lift(lift);
    }
    Ok(ProblemSpec {
        name: name.into(),
        kind: ProblemKind::Pde,
        domain: DomainKind::UnitSquare,
        operator: Operator::new(vec![OperatorTerm::NegLaplacian, OperatorTerm::ShiftedSquare { shift: 2.0 }]),
        exact,
        rhs,
        wrap: Some(wrap),
        exclusion: 0.0,
    })
}

fn regression_discontinuous() -> ProblemSpec {
    let exact: JetFn = Arc::new(|x: &[Jet]| {
        let step = if x[0].value >= 0.0 { 1.0 } else { -1.0 };
        x[0] * -2.0 + step
    });
    ProblemSpec {
        name: "regression-discontinuous".into(),
        kind: ProblemKind::Regression,
        domain: DomainKind::Interval { a: -1.0, b: 1.0 },
        operator: Operator::new(vec![OperatorTerm::Identity]),
        exact,
        rhs: Arc::new(discontinuous_target),
        wrap: None,
        exclusion: 0.0,
    }
}

fn discontinuous_target(x: &[f64]) -> f64 {
    if x[0] >= 0.0 {
        -2.0 * x[0] + 1.0
    } else {
        -2.0 * x[0] - 1.0
    }
}

/// Regression targets on `[-1, 1]`.
pub fn regression_target(name: &str) -> Result<fn(f64) -> f64> {
    match name {
        "regression-discontinuous" | "discontinuous" => Ok(|x| discontinuous_target(&[x])),
        other => Err(param_err(format!("unknown regression target `{other}`"))),
    }
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn sampler(&self, seed: u64) -> DomainSampler {
        DomainSampler::new(self.domain, seed).with_exclusion(self.exclusion)
    }

    pub fn exact_value(&self, x: &[f64]) -> f64 {
        (self.exact)(&Jet::coordinates(x)).value
    }

    pub fn exact_values(&self, points: &Array2<f64>) -> Vec<f64> {
        points.rows().into_iter().map(|r| self.exact_value(&r.to_vec())).collect()
    }

    pub fn rhs_values(&self, points: &Array2<f64>) -> Vec<f64> {
        points.rows().into_iter().map(|r| (self.rhs)(&r.to_vec())).collect()
    }

    /// `D u_exact - f` at every row of `points`, with `u_exact` evaluated on a
    /// network-free graph.
    pub fn exact_residuals(&self, points: &Array2<f64>) -> Result<Vec<f64>> {
        let mut g = Graph::new(self.dim());
        let u = g.field(self.exact.clone());
        g.set_output(u);
        let trace = g.forward(points.view(), self.operator.order(), false)?;
        Ok(points
            .rows()
            .into_iter()
            .zip(trace.jets())
            .map(|(x, j)| {
                let x = x.to_vec();
                self.operator.apply(&x, &j) - (self.rhs)(&x)
            })
            .collect())
    }

    /// Checks `|D u_exact - f| <= tol` at seeded interior points.
    pub fn check_consistency(&self, seed: u64) -> Result<f64> {
        let pts = self.sampler(seed).interior(SELF_CONSISTENCY_POINTS);
        let worst = self.exact_residuals(&pts)?.into_iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if !(worst <= SELF_CONSISTENCY_TOL) {
            return Err(Error::Consistency(format!("{}: max |D u - f| = {worst:e}", self.name)));
        }
        Ok(worst)
    }

    /// Residuals `D u - f` of an ansatz at every row of `points`.
    pub fn residuals(&self, ansatz: &Ansatz, points: &Array2<f64>) -> Result<Vec<f64>> {
        let g = ansatz.graph();
        let trace = g.forward(points.view(), self.operator.order(), false)?;
        Ok(points
            .rows()
            .into_iter()
            .zip(trace.jets())
            .map(|(x, j)| {
                let x = x.to_vec();
                self.operator.apply(&x, &j) - (self.rhs)(&x)
            })
            .collect())
    }
}

/// Residual `D u(x) - f(x)` of an ansatz at a single point.
pub fn apply_operator(problem: &ProblemSpec, ansatz: &Ansatz, x: &[f64]) -> Result<f64> {
    if x.len() != problem.dim() {
        return Err(Error::Dimension { expected: problem.dim(), got: x.len() });
    }
    let p = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("one row");
    Ok(problem.residuals(ansatz, &p)?[0])
}

#[cfg(test)]
mod tests;
