//! Cosine, Gabor and Gaussian radial-basis atoms as exact networks.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, LayerBuilder, Value};
use crate::activations::BasicActivation;
use crate::error::{param_err, Error, Result};
use crate::networks::NetworkParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomKind {
    /// `prod_i cos(w_i x_i)`
    CosineBasis,
    /// `exp(-|x - c|^2 / sigma^2) cos(w . x + phase)`
    GaborAtom,
    /// `exp(-|x - c|^2 / sigma^2)`
    GaussianRbf,
}

impl AtomKind {
    pub const ALL: [AtomKind; 3] = [AtomKind::CosineBasis, AtomKind::GaborAtom, AtomKind::GaussianRbf];

    pub fn name(self) -> &'static str {
        match self {
            AtomKind::CosineBasis => "cosine-basis",
            AtomKind::GaborAtom => "gabor-atom",
            AtomKind::GaussianRbf => "gaussian-rbf",
        }
    }
}

impl fmt::Display for AtomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AtomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AtomKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| param_err(format!("unknown atom kind `{s}`")))
    }
}

/// Atom parameters; unused fields are ignored by a kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtomParams {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub frequencies: Vec<f64>,
    pub phase: f64,
}

impl Default for AtomParams {
    fn default() -> Self {
        AtomParams { center: vec![0.0], sigma: 1.0, frequencies: vec![1.0], phase: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub kind: AtomKind,
    pub params: AtomParams,
}

impl Atom {
    pub fn new(kind: AtomKind, params: AtomParams) -> Result<Self> {
        let p = &params;
        let dim = match kind {
            AtomKind::CosineBasis => p.frequencies.len(),
            AtomKind::GaussianRbf => p.center.len(),
            AtomKind::GaborAtom => {
                if p.frequencies.len() != p.center.len() {
                    return Err(Error::Dimension { expected: p.center.len(), got: p.frequencies.len() });
                }
                p.center.len()
            }
        };
        if dim == 0 {
            return Err(param_err(format!("{kind} needs at least one dimension")));
        }
        if kind != AtomKind::CosineBasis && !(p.sigma > 0.0 && p.sigma.is_finite()) {
            return Err(param_err(format!("sigma must be positive, got {}", p.sigma)));
        }
        let finite = p.center.iter().chain(&p.frequencies).chain([&p.phase]).all(|v| v.is_finite());
        if !finite {
            return Err(param_err("atom parameters must be finite"));
        }
        Ok(Atom { kind, params })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            AtomKind::CosineBasis => self.params.frequencies.len(),
            _ => self.params.center.len(),
        }
    }

    /// Closed-form value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let p = &self.params;
        let window = || {
            let r2: f64 = x.iter().zip(&p.center).map(|(a, c)| (a - c).powi(2)).sum();
            (-r2 / (p.sigma * p.sigma)).exp()
        };
        match self.kind {
            AtomKind::CosineBasis => x.iter().zip(&p.frequencies).map(|(a, w)| (w * a).cos()).product(),
            AtomKind::GaussianRbf => window(),
            AtomKind::GaborAtom => {
                let arg: f64 = x.iter().zip(&p.frequencies).map(|(a, w)| a * w).sum::<f64>() + p.phase;
                window() * arg.cos()
            }
        }
    }

    /// One layer of sine and Gaussian neurons, then a product tree.
    pub fn build(&self) -> Result<NetworkParams> {
        let p = &self.params;
        let d = self.dim();
        let mut circuit = Circuit::new(d);
        let x = circuit.inputs();
        let mut first = LayerBuilder::new();
        let windows = |layer: &mut LayerBuilder| -> Vec<Value> {
            (0..d)
                .map(|i| {
                    let u = x[i].plus(&Value::constant(-p.center[i])).scaled(1.0 / p.sigma);
                    layer.neuron(BasicActivation::Gaussian, u)
                })
                .collect()
        };
        let factors = match self.kind {
            AtomKind::CosineBasis => (0..d)
                .map(|i| {
                    first.neuron(BasicActivation::Sine, x[i].scaled(p.frequencies[i]).plus(&Value::constant(FRAC_PI_2)))
                })
                .collect(),
            AtomKind::GaussianRbf => windows(&mut first),
            AtomKind::GaborAtom => {
                let mut f = windows(&mut first);
                let arg = (0..d)
                    .fold(Value::constant(p.phase + FRAC_PI_2), |acc, i| acc.plus(&x[i].scaled(p.frequencies[i])));
                f.push(first.neuron(BasicActivation::Sine, arg));
                f
            }
        };
        circuit.push(first);
        let mut values: Vec<Value> = factors;
        while values.len() > 1 {
            let mut layer = LayerBuilder::new();
            values = values
                .chunks(2)
                .map(|pair| match pair {
                    [u, v] => layer.mul(u, v),
                    [u] => layer.carry(u),
                    _ => unreachable!(),
                })
                .collect();
            circuit.push(layer);
        }
        circuit.finish(values.pop().expect("at least one factor"))
    }
}

/// Builds the named atom.
pub fn build_special_atoms(kind: &str, params: &AtomParams) -> Result<NetworkParams> {
    Atom::new(kind.parse()?, params.clone())?.build()
}
