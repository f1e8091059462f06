//! Pass/fail records comparing constructed networks with their targets.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{build_monomial_net, build_polynomial_net, ceil_log2, Atom, ChebyshevSpec, MonomialSpec, PolynomialSpec};
use crate::autodiff::eval_batch;
use crate::error::Result;
use crate::networks::NetworkParams;

/// Slack on top of the Chebyshev truncation bound for coefficient round-off.
pub const CHEBYSHEV_ROUNDOFF: f64 = 1e-9;
/// Pointwise tolerance for the closed-form atoms.
pub const ATOM_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for polynomial reproduction.
pub const POLYNOMIAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub target: String,
    pub max_error: Option<f64>,
    pub bound: f64,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub width_limit: usize,
    pub depth_limit: usize,
    pub pass: bool,
    pub error: Option<String>,
}

impl Certificate {
    fn failed(target: String, bound: f64, width_limit: usize, depth_limit: usize, err: crate::Error) -> Self {
        Certificate {
            target,
            max_error: None,
            bound,
            width: None,
            depth: None,
            width_limit,
            depth_limit,
            pass: false,
            error: Some(err.to_string()),
        }
    }

    fn measured(
        target: String,
        net: &NetworkParams,
        max_error: f64,
        bound: f64,
        width_limit: usize,
        depth_limit: usize,
    ) -> Self {
        let (width, depth) = (net.max_width(), net.depth());
        Certificate {
            target,
            max_error: Some(max_error),
            bound,
            width: Some(width),
            depth: Some(depth),
            width_limit,
            depth_limit,
            pass: max_error <= bound && width <= width_limit && depth <= depth_limit,
            error: None,
        }
    }
}

/// `n` points drawn uniformly from `[-1, 1]^d`.
pub fn cube_points(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..=1.0))
}

/// `n` equally spaced points covering `[-half_width, half_width]`.
pub fn uniform_grid(n: usize, half_width: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| half_width * (-1.0 + 2.0 * i as f64 / (n - 1) as f64)).collect(),
    }
}

/// `max_i |net(x_i) - oracle(x_i)|` and `max_i |oracle(x_i)|`.
pub fn max_abs_error(net: &NetworkParams, points: &Array2<f64>, oracle: impl Fn(&[f64]) -> f64) -> Result<(f64, f64)> {
    let out = eval_batch(net, points)?;
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for (x, y) in points.rows().into_iter().zip(out) {
        let t = oracle(&x.to_vec());
        err = err.max((y - t).abs());
        scale = scale.max(t.abs());
    }
    Ok((err, scale))
}

fn describe_monomial(m: &MonomialSpec) -> String {
    let parts: Vec<String> = m
        .exponents
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(i, &e)| if e == 1 { format!("x{}", i + 1) } else { format!("x{}^{e}", i + 1) })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

pub fn certify_monomial(m: &MonomialSpec, n: usize, l: usize, points: &Array2<f64>) -> Certificate {
    let target = format!("monomial {}", describe_monomial(m));
    let (wl, dl) = (2 * n + m.dim(), l + ceil_log2(n) as usize);
    let run = || -> Result<Certificate> {
        let net = build_monomial_net(m, n, l)?;
        let (err, scale) = max_abs_error(&net, points, |x| m.eval(x))?;
        Ok(Certificate::measured(target.clone(), &net, err, POLYNOMIAL_TOLERANCE * (1.0 + scale), wl, dl))
    };
    run().unwrap_or_else(|e| Certificate::failed(target.clone(), 0.0, wl, dl, e))
}

/// Polynomial net against a Horner oracle.
pub fn certify_polynomial(name: &str, p: &PolynomialSpec, n: usize, l: usize, points: &Array2<f64>) -> Certificate {
    let target = format!("polynomial {name}");
    let (wl, dl) = (2 * n * p.rows + p.dim + 1, l);
    let run = || -> Result<Certificate> {
        let net = build_polynomial_net(p, n, l)?;
        let (err, scale) = max_abs_error(&net, points, |x| p.horner(x))?;
        Ok(Certificate::measured(target.clone(), &net, err, POLYNOMIAL_TOLERANCE * (1.0 + scale), wl, dl))
    };
    run().unwrap_or_else(|e| Certificate::failed(target.clone(), 0.0, wl, dl, e))
}

/// Chebyshev net against `f` on a grid; the bound is the truncation bound
/// plus round-off slack, or the slack alone without an ellipse.
pub fn certify_chebyshev(
    name: &str,
    f: impl Fn(f64) -> f64,
    spec: &ChebyshevSpec,
    n: usize,
    l: usize,
    grid: &[f64],
) -> Certificate {
    let target = format!("chebyshev {name} degree {}", spec.degree());
    let bound = spec.error_bound().unwrap_or(0.0) + CHEBYSHEV_ROUNDOFF;
    let (wl, dl) = (2 * n + 2, l);
    let run = || -> Result<Certificate> {
        let net = super::build_chebyshev_net(spec, n, l)?;
        let points = Array2::from_shape_vec((grid.len(), 1), grid.to_vec()).expect("one column");
        let (err, _) = max_abs_error(&net, &points, |x| f(x[0]))?;
        Ok(Certificate::measured(target.clone(), &net, err, bound, wl, dl))
    };
    run().unwrap_or_else(|e| Certificate::failed(target.clone(), bound, wl, dl, e))
}

pub fn certify_atom(atom: &Atom, points: &Array2<f64>) -> Certificate {
    let target = format!("{} in {} dimension(s)", atom.kind, atom.dim());
    // sine/Gaussian layer, then a product tree over the factors
    let factors = atom.dim() + usize::from(atom.kind == super::AtomKind::GaborAtom);
    let (wl, dl) = (2 * factors, 1 + ceil_log2(factors) as usize);
    let run = || -> Result<Certificate> {
        let net = atom.build()?;
        let (err, _) = max_abs_error(&net, points, |x| atom.eval(x))?;
        Ok(Certificate::measured(target.clone(), &net, err, ATOM_TOLERANCE, wl, dl))
    };
    run().unwrap_or_else(|e| Certificate::failed(target.clone(), ATOM_TOLERANCE, wl, dl, e))
}
