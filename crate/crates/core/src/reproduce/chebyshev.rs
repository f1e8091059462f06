//! Truncated Chebyshev series and their exact network realization.

use std::f64::consts::PI;

use serde::Serialize;

use super::{build_polynomial_net, MonomialSpec, PolynomialSpec};
use crate::error::{param_err, Result};
use crate::networks::NetworkParams;

/// Bernstein ellipse `s` scaled to `[-M, M]` with `|f| <= bound` inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipse {
    pub s: f64,
    pub bound: f64,
}

/// `f_n(x) = sum_k c_k T_k(x / M)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebyshevSpec {
    pub half_width: f64,
    pub coeffs: Vec<f64>,
    pub ellipse: Option<Ellipse>,
}

impl ChebyshevSpec {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn with_ellipse(mut self, s: f64, bound: f64) -> Result<Self> {
        if !(s > 1.0) {
            return Err(param_err(format!("ellipse parameter s must exceed 1, got {s}")));
        }
        if !(bound > 0.0) {
            return Err(param_err(format!("ellipse bound must be positive, got {bound}")));
        }
        self.ellipse = Some(Ellipse { s, bound });
        Ok(self)
    }

    /// Semi-axes `(M (s + 1/s) / 2, M (s - 1/s) / 2)`.
    pub fn semi_axes(&self) -> Option<(f64, f64)> {
        self.ellipse.map(|e| (self.half_width * (e.s + 1.0 / e.s) / 2.0, self.half_width * (e.s - 1.0 / e.s) / 2.0))
    }

    /// Truncation bound `2 C_f s^-n / (s - 1)`, if an ellipse is known.
    pub fn error_bound(&self) -> Option<f64> {
        self.ellipse.map(|e| 2.0 * e.bound * e.s.powi(-(self.degree() as i32)) / (e.s - 1.0))
    }

    /// Clenshaw evaluation of the series.
    pub fn eval(&self, x: f64) -> f64 {
        let t = x / self.half_width;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coeffs.first().copied().unwrap_or(0.0)
    }

    /// Power-basis coefficients `p_j` with `f_n(x) = sum_j p_j x^j`.
    pub fn monomial_coeffs(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        let mut prev = vec![1.0];
        let mut cur = vec![0.0, 1.0];
        for (k, &c) in self.coeffs.iter().enumerate() {
            let tk = match k {
                0 => prev.clone(),
                1 => cur.clone(),
                _ => {
                    let mut next = vec![0.0; k + 1];
                    for (i, v) in cur.iter().enumerate() {
                        next[i + 1] += 2.0 * v;
                    }
                    for (i, v) in prev.iter().enumerate() {
                        next[i] -= v;
                    }
                    prev = std::mem::replace(&mut cur, next);
                    cur.clone()
                }
            };
            for (o, v) in out.iter_mut().zip(&tk) {
                *o += c * v;
            }
        }
        let mut scale = 1.0;
        for o in out.iter_mut() {
            *o *= scale;
            scale /= self.half_width;
        }
        out
    }

    pub fn polynomial(&self) -> PolynomialSpec {
        let terms = self
            .monomial_coeffs()
            .into_iter()
            .enumerate()
            .map(|(j, c)| (c, MonomialSpec::new(vec![j as u32])))
            .collect();
        PolynomialSpec::new(1, terms)
    }
}

/// Coefficients of the degree-`n` interpolant at the Chebyshev points of the
/// first kind on `[-M, M]`.
pub fn chebyshev_coeffs(f: impl Fn(f64) -> f64, n: usize, half_width: f64) -> Result<ChebyshevSpec> {
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(param_err(format!("half-width must be positive, got {half_width}")));
    }
    let m = n + 1;
    let theta: Vec<f64> = (0..m).map(|j| PI * (j as f64 + 0.5) / m as f64).collect();
    let values: Vec<f64> = theta.iter().map(|t| f(half_width * t.cos())).collect();
    let coeffs = (0..m)
        .map(|k| {
            let s: f64 = values.iter().zip(&theta).map(|(v, t)| v * (k as f64 * t).cos()).sum();
            let c = 2.0 * s / m as f64;
            if k == 0 {
                c / 2.0
            } else {
                c
            }
        })
        .collect();
    Ok(ChebyshevSpec { half_width, coeffs, ellipse: None })
}

/// `2 C_f s^-n / (s - 1)`.
pub fn chebyshev_error_bound(bound: f64, s: f64, n: usize) -> Result<f64> {
    if !(s > 1.0) {
        return Err(param_err(format!("ellipse parameter s must exceed 1, got {s}")));
    }
    if !(bound > 0.0) {
        return Err(param_err(format!("C_f must be positive, got {bound}")));
    }
    Ok(2.0 * bound * s.powi(-(n as i32)) / (s - 1.0))
}

/// Polynomial network for `f_n` in a single row of `n + 1` blocks.
pub fn build_chebyshev_net(spec: &ChebyshevSpec, n: usize, l: usize) -> Result<NetworkParams> {
    build_polynomial_net(&spec.polynomial(), n, l)
}
