//! Exact values, parameter gradients and input derivatives of networks.
//!
//! Input derivatives are propagated forward as second-order jets; parameter
//! gradients of any jet component come from one reverse pass over the same
//! graph.

mod jet;
mod trace;

use ndarray::Array2;

use crate::error::{param_err, Error, Result};
use crate::networks::NetworkParams;

pub use jet::{Jet, JetFn, MAX_DIM};
pub use trace::{DerivOrder, EvalTrace, Graph, NodeId};

/// Alias used where a jet describes one point's derivatives.
pub type SecondOrderValue = Jet;

fn point(net: &NetworkParams, x: &[f64]) -> Result<Array2<f64>> {
    if x.len() != net.input_dim {
        return Err(Error::Dimension { expected: net.input_dim, got: x.len() });
    }
    Ok(Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("one row"))
}

/// Network output at `x`.
pub fn eval(net: &NetworkParams, x: &[f64]) -> Result<f64> {
    let p = point(net, x)?;
    let g = Graph::of(net);
    Ok(g.forward(p.view(), DerivOrder::Value, false)?.values()[0])
}

/// Network outputs at every row of `points`.
pub fn eval_batch(net: &NetworkParams, points: &Array2<f64>) -> Result<Vec<f64>> {
    let g = Graph::of(net);
    Ok(g.forward(points.view(), DerivOrder::Value, false)?.values())
}

/// Gradient of the output with respect to every trainable parameter, in the
/// network's canonical order.
pub fn param_gradient(net: &NetworkParams, x: &[f64]) -> Result<Vec<f64>> {
    let p = point(net, x)?;
    let g = Graph::of(net);
    let t = g.forward(p.view(), DerivOrder::Value, true)?;
    t.backward(&[Jet::constant(1.0, net.input_dim.min(MAX_DIM))])
}

/// Value, gradient and pure second derivatives of the output at `x`.
pub fn second_order(net: &NetworkParams, x: &[f64]) -> Result<Jet> {
    let p = point(net, x)?;
    if x.len() > MAX_DIM {
        return Err(param_err(format!("jets support at most {MAX_DIM} inputs")));
    }
    let g = Graph::of(net);
    Ok(g.forward(p.view(), DerivOrder::Laplacian, false)?.jet(0))
}

pub fn input_gradient(net: &NetworkParams, x: &[f64]) -> Result<Vec<f64>> {
    let p = point(net, x)?;
    if x.len() > MAX_DIM {
        return Err(param_err(format!("jets support at most {MAX_DIM} inputs")));
    }
    let g = Graph::of(net);
    Ok(g.forward(p.view(), DerivOrder::Gradient, false)?.jet(0).gradient().to_vec())
}

pub fn input_laplacian(net: &NetworkParams, x: &[f64]) -> Result<f64> {
    Ok(second_order(net, x)?.laplacian())
}

/// Central-difference estimates of the input gradient and Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct FdEstimate {
    pub gradient: Vec<f64>,
    pub laplacian: f64,
}

/// Central differences with step `h` for the gradient and the Laplacian.
/// Meant as a test oracle.
pub fn fd_oracle(net: &NetworkParams, x: &[f64], h: f64) -> Result<FdEstimate> {
    fd_oracle_fn(|p| eval(net, p), x, h)
}

pub(crate) fn fd_oracle_fn(f: impl Fn(&[f64]) -> Result<f64>, x: &[f64], h: f64) -> Result<FdEstimate> {
    if !(h > 0.0) {
        return Err(param_err(format!("finite-difference step must be positive, got {h}")));
    }
    let f0 = f(x)?;
    let mut gradient = Vec::with_capacity(x.len());
    let mut laplacian = 0.0;
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        xp[k] = x[k] + h;
        let fp = f(&xp)?;
        xp[k] = x[k] - h;
        let fm = f(&xp)?;
        xp[k] = x[k];
        gradient.push((fp - fm) / (2.0 * h));
        laplacian += (fp - 2.0 * f0 + fm) / (h * h);
    }
    Ok(FdEstimate { gradient, laplacian })
}

/// Central-difference estimate of the parameter gradient with step `h`.
pub fn fd_param_gradient(net: &NetworkParams, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(param_err(format!("finite-difference step must be positive, got {h}")));
    }
    let theta = net.trainable_vector();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(theta.len());
    let mut t = theta.clone();
    for i in 0..theta.len() {
        t[i] = theta[i] + h;
        probe.set_trainable_vector(&t)?;
        let fp = eval(&probe, x)?;
        t[i] = theta[i] - h;
        probe.set_trainable_vector(&t)?;
        let fm = eval(&probe, x)?;
        t[i] = theta[i];
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
