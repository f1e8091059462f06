//! Basic activation functions and per-neuron reproducing activations.
//!
//! A reproducing activation is a learnable combination
//! `sigma(x) = sum_p alpha_p * gamma_p(beta_p * x)` of basic functions. Networks
//! use it in two ways: every neuron carries its own trainable combination
//! (signal fitting), or each neuron is pinned to a single basic function with a
//! fixed scaling and the layer is partitioned round-robin over a set of kinds.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

/// Largest `|beta * x|` accepted by the `2^x` activation.
pub const POW2_GUARD: f64 = 64.0;

/// Differentiability class of a basic activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    Continuous,
    Discontinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasicActivation {
    /// `x`
    Identity,
    /// `x^2`
    Square,
    Sine,
    Cosine,
    /// `exp(-x^2)`, scaled as `exp(-(beta x)^2)`.
    Gaussian,
    /// `exp(-x^2 / 2)`, scaled as `exp(-x^2 / (2 beta^2))`.
    GaussianWindow,
    Relu,
    /// `max(0, x)^3`
    Relu3,
    /// `floor(x)`
    Floor,
    /// `2^x`
    Pow2,
    /// `T(x - floor(x) - 1/2)` with `T` the Heaviside step, `T(0) = 1`.
    Step,
}

impl BasicActivation {
    pub const ALL: [BasicActivation; 11] = [
        BasicActivation::Identity,
        BasicActivation::Square,
        BasicActivation::Sine,
        BasicActivation::Cosine,
        BasicActivation::Gaussian,
        BasicActivation::GaussianWindow,
        BasicActivation::Relu,
        BasicActivation::Relu3,
        BasicActivation::Floor,
        BasicActivation::Pow2,
        BasicActivation::Step,
    ];

    /// The poly-sine-Gaussian set `{x, x^2, sin x, exp(-x^2)}`.
    pub const POLY_SINE_GAUSSIAN: [BasicActivation; 4] =
        [BasicActivation::Identity, BasicActivation::Square, BasicActivation::Sine, BasicActivation::Gaussian];

    pub fn name(self) -> &'static str {
        match self {
            BasicActivation::Identity => "x",
            BasicActivation::Square => "x2",
            BasicActivation::Sine => "sin",
            BasicActivation::Cosine => "cos",
            BasicActivation::Gaussian => "gauss",
            BasicActivation::GaussianWindow => "gauss-window",
            BasicActivation::Relu => "relu",
            BasicActivation::Relu3 => "relu3",
            BasicActivation::Floor => "floor",
            BasicActivation::Pow2 => "pow2",
            BasicActivation::Step => "step",
        }
    }

    pub fn smoothness(self) -> Smoothness {
        match self {
            BasicActivation::Relu | BasicActivation::Relu3 => Smoothness::Continuous,
            BasicActivation::Floor | BasicActivation::Step => Smoothness::Discontinuous,
            _ => Smoothness::Smooth,
        }
    }

    /// Default frozen scaling used by partitioned layers.
    pub fn default_scaling(self) -> f64 {
        match self {
            BasicActivation::Gaussian => 0.1,
            _ => 1.0,
        }
    }

    /// Argument multiplier applied to the input: `beta` for every kind except
    /// the Gaussian window, whose width parameter divides the input.
    pub fn effective_scale(self, beta: f64) -> f64 {
        match self {
            BasicActivation::GaussianWindow => 1.0 / beta,
            _ => beta,
        }
    }

    /// `d(effective_scale)/d(beta)`.
    pub fn effective_scale_slope(self, beta: f64) -> f64 {
        match self {
            BasicActivation::GaussianWindow => -1.0 / (beta * beta),
            _ => 1.0,
        }
    }

    /// Value and derivatives `[f, f', f'', f''']` at `u`, filled up to `order`
    /// (entries above `order` are zero).
    #[inline(always)]
    pub fn derivatives(self, u: f64, order: usize) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        match self {
            BasicActivation::Identity => {
                out[0] = u;
                out[1] = 1.0;
            }
            BasicActivation::Square => {
                out[0] = u * u;
                out[1] = 2.0 * u;
                out[2] = 2.0;
            }
            BasicActivation::Sine => {
                let (s, c) = u.sin_cos();
                out = [s, c, -s, -c];
            }
            BasicActivation::Cosine => {
                let (s, c) = u.sin_cos();
                out = [c, -s, -c, s];
            }
            BasicActivation::Gaussian => {
                let g = (-u * u).exp();
                out = [g, -2.0 * u * g, (4.0 * u * u - 2.0) * g, (12.0 * u - 8.0 * u * u * u) * g];
            }
            BasicActivation::GaussianWindow => {
                let g = (-0.5 * u * u).exp();
                out = [g, -u * g, (u * u - 1.0) * g, (3.0 * u - u * u * u) * g];
            }
            BasicActivation::Relu => {
                // derivative at the kink is taken as 0, second derivative as 0
                if u > 0.0 {
                    out[0] = u;
                    out[1] = 1.0;
                }
            }
            BasicActivation::Relu3 => {
                if u > 0.0 {
                    out = [u * u * u, 3.0 * u * u, 6.0 * u, 6.0];
                }
            }
            BasicActivation::Pow2 => {
                if !(u.abs() <= POW2_GUARD) {
                    return Err(Error::NumericOverflow(format!(
                        "2^x argument {u} outside [-{POW2_GUARD}, {POW2_GUARD}]"
                    )));
                }
                let v = u.exp2();
                out = [v, LN_2 * v, LN_2 * LN_2 * v, LN_2 * LN_2 * LN_2 * v];
            }
            BasicActivation::Floor | BasicActivation::Step => {
                if order > 0 {
                    return Err(Error::UnsupportedDerivative(format!("{} has no derivative", self.name())));
                }
                out[0] = if self == BasicActivation::Floor {
                    u.floor()
                } else if u - u.floor() - 0.5 >= 0.0 {
                    1.0
                } else {
                    0.0
                };
            }
        }
        for v in out.iter_mut().skip(order + 1) {
            *v = 0.0;
        }
        Ok(out)
    }
}

impl fmt::Display for BasicActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasicActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "x" | "identity" => BasicActivation::Identity,
            "x2" | "square" => BasicActivation::Square,
            "sin" | "sine" => BasicActivation::Sine,
            "cos" | "cosine" => BasicActivation::Cosine,
            "gauss" | "gaussian" => BasicActivation::Gaussian,
            "gauss-window" | "gaussian-window" => BasicActivation::GaussianWindow,
            "relu" => BasicActivation::Relu,
            "relu3" => BasicActivation::Relu3,
            "floor" => BasicActivation::Floor,
            "pow2" => BasicActivation::Pow2,
            "step" => BasicActivation::Step,
            other => return Err(param_err(format!("unknown activation kind `{other}`"))),
        };
        Ok(kind)
    }
}

/// Evaluates a basic activation at `x`.
pub fn eval_basic(kind: BasicActivation, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NumericOverflow(format!("non-finite activation input {x}")));
    }
    Ok(kind.derivatives(x, 0)?[0])
}

/// Derivatives `[s, s', s'', s''']` (up to `order`) of the neuron activation
/// `s(z) = sum_p alpha_p gamma_p(c_p z)` where `c_p` is the effective scale.
pub(crate) fn combined_derivatives(
    kinds: &[BasicActivation],
    alpha: &[f64],
    beta: &[f64],
    z: f64,
    order: usize,
) -> Result<[f64; 4]> {
    let mut s = [0.0; 4];
    for ((&kind, &a), &b) in kinds.iter().zip(alpha).zip(beta) {
        let c = kind.effective_scale(b);
        let d = kind.derivatives(c * z, order)?;
        let mut cm = a;
        for (acc, dm) in s.iter_mut().zip(d.iter()).take(order + 1) {
            *acc += cm * dm;
            cm *= c;
        }
    }
    Ok(s)
}

/// One term `alpha * gamma(beta x)` of a reproducing activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RafTerm {
    pub kind: BasicActivation,
    pub alpha: f64,
    pub beta: f64,
}

/// Per-neuron reproducing activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RafSpec {
    pub terms: Vec<RafTerm>,
    pub train_alpha: bool,
    pub train_beta: bool,
}

impl RafSpec {
    pub fn new(terms: Vec<RafTerm>) -> Result<Self> {
        let spec = RafSpec { terms, train_alpha: true, train_beta: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn single(kind: BasicActivation, alpha: f64, beta: f64) -> Self {
        RafSpec { terms: vec![RafTerm { kind, alpha, beta }], train_alpha: false, train_beta: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(param_err("reproducing activation needs at least one term"));
        }
        for t in &self.terms {
            if !t.alpha.is_finite() || !t.beta.is_finite() {
                return Err(param_err("alpha and beta must be finite"));
            }
        }
        Ok(())
    }

    fn columns(&self) -> (Vec<BasicActivation>, Vec<f64>, Vec<f64>) {
        let kinds = self.terms.iter().map(|t| t.kind).collect();
        let alpha = self.terms.iter().map(|t| t.alpha).collect();
        let beta = self.terms.iter().map(|t| t.beta).collect();
        (kinds, alpha, beta)
    }
}

/// Evaluates `sum_p alpha_p gamma_p(beta_p x)`.
pub fn eval_raf(raf: &RafSpec, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NumericOverflow(format!("non-finite activation input {x}")));
    }
    let (kinds, alpha, beta) = raf.columns();
    Ok(combined_derivatives(&kinds, &alpha, &beta, x, 0)?[0])
}

/// Value, first and second derivative of a reproducing activation.
pub fn raf_derivatives(raf: &RafSpec, x: f64) -> Result<(f64, f64, f64)> {
    let (kinds, alpha, beta) = raf.columns();
    let s = combined_derivatives(&kinds, &alpha, &beta, x, 2)?;
    Ok((s[0], s[1], s[2]))
}

/// Sampling law for an activation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Constant(f64),
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Constant(v) if !v.is_finite() => Err(param_err("constant must be finite")),
            Distribution::Normal { mean, std } if !(std >= 0.0) || !mean.is_finite() || !std.is_finite() => {
                Err(param_err(format!("normal distribution needs finite mean and std >= 0, got std = {std}")))
            }
            Distribution::Uniform { low, high } if !(low <= high) || !low.is_finite() || !high.is_finite() => {
                Err(param_err(format!("uniform distribution needs low <= high, got [{low}, {high}]")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Constant(v) => v,
            Distribution::Normal { mean, std } => {
                if std == 0.0 {
                    mean
                } else {
                    Normal::new(mean, std).expect("validated").sample(rng)
                }
            }
            Distribution::Uniform { low, high } => {
                if low == high {
                    low
                } else {
                    Uniform::new_inclusive(low, high).expect("validated").sample(rng)
                }
            }
        }
    }
}

/// Initialization law for one term of a reproducing activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RafTermInit {
    pub kind: BasicActivation,
    pub alpha: Distribution,
    pub beta: Distribution,
}

impl RafTermInit {
    pub fn fixed(kind: BasicActivation, alpha: f64, beta: f64) -> Self {
        RafTermInit { kind, alpha: Distribution::Constant(alpha), beta: Distribution::Constant(beta) }
    }
}

/// Image-fitting presets: sine, poly-sine and poly-sine-Gaussian.
pub mod presets {
    use super::{BasicActivation as K, Distribution as D, RafTermInit};

    fn normal(mean: f64, std: f64) -> D {
        D::Normal { mean, std }
    }

    pub fn sine() -> Vec<RafTermInit> {
        vec![RafTermInit { kind: K::Sine, alpha: normal(2.0, 0.1), beta: normal(30.0, 0.001) }]
    }

    pub fn sine_gaussian() -> Vec<RafTermInit> {
        vec![
            RafTermInit { kind: K::Sine, alpha: normal(2.0, 0.1), beta: normal(30.0, 0.001) },
            RafTermInit {
                kind: K::GaussianWindow,
                alpha: normal(1.0, 0.1),
                beta: D::Uniform { low: 0.01, high: 0.05 },
            },
        ]
    }

    pub fn poly_sine() -> Vec<RafTermInit> {
        vec![
            RafTermInit { kind: K::Sine, alpha: normal(2.0, 0.1), beta: normal(30.0, 0.001) },
            RafTermInit { kind: K::Identity, alpha: normal(0.0, 0.1), beta: D::Constant(1.0) },
            RafTermInit { kind: K::Square, alpha: normal(1.0, 0.1), beta: D::Constant(1.0) },
        ]
    }

    pub fn poly_sine_gaussian() -> Vec<RafTermInit> {
        let mut terms = sine_gaussian();
        terms.push(RafTermInit { kind: K::Identity, alpha: normal(0.0, 0.1), beta: D::Constant(1.0) });
        terms.push(RafTermInit { kind: K::Square, alpha: normal(1.0, 0.1), beta: D::Constant(1.0) });
        terms
    }

    /// Fixed `sin(30 x)`.
    pub fn siren() -> Vec<RafTermInit> {
        vec![RafTermInit::fixed(K::Sine, 1.0, 30.0)]
    }
}

/// Samples one reproducing activation from a per-term distribution table.
pub fn init_raf(table: &[RafTermInit], seed: u64) -> Result<RafSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_raf(table, &mut rng)
}

pub(crate) fn sample_raf<R: Rng + ?Sized>(table: &[RafTermInit], rng: &mut R) -> Result<RafSpec> {
    if table.is_empty() {
        return Err(param_err("reproducing activation needs at least one term"));
    }
    for t in table {
        t.alpha.validate()?;
        t.beta.validate()?;
    }
    let terms =
        table.iter().map(|t| RafTerm { kind: t.kind, alpha: t.alpha.sample(rng), beta: t.beta.sample(rng) }).collect();
    Ok(RafSpec { terms, train_alpha: true, train_beta: true })
}

/// Single-kind assignment of every neuron of a layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAssignment {
    pub kinds: Vec<BasicActivation>,
    pub scalings: Vec<f64>,
}

impl PartitionAssignment {
    pub fn width(&self) -> usize {
        self.kinds.len()
    }

    pub fn count(&self, kind: BasicActivation) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    /// Replaces the scaling of the `n` sine neurons by `2 pi, 4 pi, ..., 2 n pi`.
    pub fn with_sine_frequencies(mut self) -> Self {
        let mut j = 0;
        for (k, s) in self.kinds.iter().zip(self.scalings.iter_mut()) {
            if *k == BasicActivation::Sine {
                j += 1;
                *s = 2.0 * PI * j as f64;
            }
        }
        self
    }
}

/// Assigns the kinds of `set` round-robin over `width` neurons; neuron `i`
/// gets `set[i % set.len()]` with scaling `scalings[i % set.len()]`.
pub fn partition_layer(width: usize, set: &[BasicActivation], scalings: &[f64]) -> Result<PartitionAssignment> {
    if set.is_empty() {
        return Err(param_err("activation set is empty"));
    }
    if scalings.len() != set.len() {
        return Err(param_err(format!("{} scalings given for {} activation kinds", scalings.len(), set.len())));
    }
    if width < set.len() {
        return Err(param_err(format!("layer width {width} is smaller than the activation set ({})", set.len())));
    }
    let kinds = (0..width).map(|i| set[i % set.len()]).collect();
    let scalings = (0..width).map(|i| scalings[i % set.len()]).collect();
    Ok(PartitionAssignment { kinds, scalings })
}
