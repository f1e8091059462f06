//! Scalar second-order jets: a value together with its first and pure second
//! partial derivatives with respect to each input coordinate.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

/// Largest input dimension a [`Jet`] can carry.
pub const MAX_DIM: usize = 4;

/// Value, gradient and pure second derivatives `d^2/dx_k^2` of a scalar
/// function at a point.
///
/// The same layout doubles as an adjoint: when used as a seed, entry `k` of
/// `grad` holds the sensitivity to the `k`-th first derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub diag: [f64; MAX_DIM],
    pub dim: usize,
}

/// Closed-form scalar field evaluated on coordinate jets.
pub type JetFn = Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>;

impl Jet {
    pub fn constant(value: f64, dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
        Jet { value, grad: [0.0; MAX_DIM], diag: [0.0; MAX_DIM], dim }
    }

    /// Coordinate jets `x_1, ..., x_d` seeded at `x`.
    pub fn coordinates(x: &[f64]) -> Vec<Jet> {
        let d = x.len();
        x.iter()
            .enumerate()
            .map(|(k, &xk)| {
                let mut j = Jet::constant(xk, d);
                j.grad[k] = 1.0;
                j
            })
            .collect()
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad[..self.dim]
    }

    pub fn second(&self) -> &[f64] {
        &self.diag[..self.dim]
    }

    pub fn laplacian(&self) -> f64 {
        self.second().iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient().iter().all(|v| v.is_finite())
            && self.second().iter().all(|v| v.is_finite())
    }

    /// Applies a scalar function with derivatives `f0, f1, f2` at `self.value`.
    pub fn chain(self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f0, self.dim);
        for k in 0..self.dim {
            let g = self.grad[k];
            out.grad[k] = f1 * g;
            out.diag[k] = f2 * g * g + f1 * self.diag[k];
        }
        out
    }

    pub fn sin(self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Jet {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn sqrt(self) -> Jet {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.value))
    }

    pub fn powf(self, p: f64) -> Jet {
        let v = self.value;
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    pub fn powi(self, n: i32) -> Jet {
        let v = self.value;
        let nf = f64::from(n);
        let d1 = if n == 0 { 0.0 } else { nf * v.powi(n - 1) };
        let d2 = if (0..2).contains(&n) { 0.0 } else { nf * (nf - 1.0) * v.powi(n - 2) };
        self.chain(v.powi(n), d1, d2)
    }

    pub fn recip(self) -> Jet {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn scale(mut self, c: f64) -> Jet {
        self.value *= c;
        for k in 0..self.dim {
            self.grad[k] *= c;
            self.diag[k] *= c;
        }
        self
    }

    /// Euclidean norm of a vector of jets.
    pub fn norm(xs: &[Jet]) -> Jet {
        let dim = xs.first().map_or(0, |j| j.dim);
        xs.iter().fold(Jet::constant(0.0, dim), |acc, &x| acc + x * x).sqrt()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.value += rhs.value;
        for k in 0..self.dim {
            self.grad[k] += rhs.grad[k];
            self.diag[k] += rhs.diag[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::constant(self.value * rhs.value, self.dim);
        for k in 0..self.dim {
            out.grad[k] = self.grad[k] * rhs.value + self.value * rhs.grad[k];
            out.diag[k] = self.diag[k] * rhs.value + 2.0 * self.grad[k] * rhs.grad[k] + self.value * rhs.diag[k];
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}
