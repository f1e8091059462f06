//! Exact constructive networks: products, monomials, polynomials, truncated
//! Chebyshev series and harmonic-analysis atoms.

mod atoms;
mod certificate;
mod chebyshev;
mod circuit;

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::networks::NetworkParams;
use circuit::{Circuit, LayerBuilder, Value};

pub use atoms::{build_special_atoms, Atom, AtomKind, AtomParams};
pub use certificate::{
    certify_atom, certify_chebyshev, certify_monomial, certify_polynomial, cube_points, max_abs_error, uniform_grid,
    Certificate,
};
pub use chebyshev::{build_chebyshev_net, chebyshev_coeffs, chebyshev_error_bound, ChebyshevSpec, Ellipse};

/// `x^alpha` for a multi-index `alpha`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MonomialSpec {
    pub exponents: Vec<u32>,
}

impl MonomialSpec {
    pub fn new(exponents: Vec<u32>) -> Self {
        MonomialSpec { exponents }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product()
    }

    /// Variable index of every factor, e.g. `x1 x2^2 -> [0, 1, 1]`.
    fn factors(&self) -> Vec<usize> {
        self.exponents.iter().enumerate().flat_map(|(i, &e)| std::iter::repeat_n(i, e as usize)).collect()
    }
}

/// `sum_j c_j x^alpha_j`, laid out as `a` rows by `b` columns of blocks.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolynomialSpec {
    pub dim: usize,
    pub terms: Vec<(f64, MonomialSpec)>,
    pub rows: usize,
    pub columns: usize,
}

impl PolynomialSpec {
    /// Single-row layout with one column per term.
    pub fn new(dim: usize, terms: Vec<(f64, MonomialSpec)>) -> Self {
        let columns = terms.len().max(1);
        PolynomialSpec { dim, terms, rows: 1, columns }
    }

    pub fn with_layout(mut self, rows: usize, columns: usize) -> Self {
        self.rows = rows;
        self.columns = columns;
        self
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(|(_, m)| m.degree()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, m)| c * m.eval(x)).sum()
    }

    /// Horner evaluation in the first variable with coefficients collected
    /// per power, recursing into the rest.
    pub fn horner(&self, x: &[f64]) -> f64 {
        horner_rec(&self.terms.iter().map(|(c, m)| (*c, m.exponents.clone())).collect::<Vec<_>>(), x)
    }

    fn check(&self) -> Result<()> {
        for (_, m) in &self.terms {
            if m.dim() != self.dim {
                return Err(Error::Dimension { expected: self.dim, got: m.dim() });
            }
        }
        if self.dim == 0 {
            return Err(Error::Parameter("polynomial needs at least one variable".into()));
        }
        Ok(())
    }
}

fn horner_rec(terms: &[(f64, Vec<u32>)], x: &[f64]) -> f64 {
    if x.is_empty() {
        return terms.iter().map(|(c, _)| c).sum();
    }
    let top = terms.iter().map(|(_, e)| e[0]).max().unwrap_or(0);
    let mut acc = 0.0;
    for p in (0..=top).rev() {
        let slice: Vec<(f64, Vec<u32>)> =
            terms.iter().filter(|(_, e)| e[0] == p).map(|(c, e)| (*c, e[1..].to_vec())).collect();
        acc = acc * x[0] + horner_rec(&slice, &x[1..]);
    }
    acc
}

/// `ceil(log2 n)` for `n >= 1`.
pub fn ceil_log2(n: usize) -> u32 {
    usize::BITS - (n.max(1) - 1).leading_zeros()
}

/// `floor(log2 n)` for `n >= 1`.
pub fn floor_log2(n: usize) -> u32 {
    usize::BITS - 1 - n.max(1).leading_zeros()
}

fn capacity(msg: String) -> Error {
    Error::Capacity(msg)
}

/// One hidden layer of two square neurons computing `x y`.
pub fn build_product_net() -> NetworkParams {
    let mut c = Circuit::new(2);
    let x = c.inputs();
    let mut layer = LayerBuilder::new();
    let out = layer.mul(&x[0], &x[1]);
    c.push(layer);
    c.finish(out).expect("product circuit is well formed")
}

enum Phase {
    Chains { values: Vec<Value>, pending: Vec<VecDeque<usize>> },
    Tree(Vec<Value>),
    Done(Value),
}

/// One monomial being multiplied out by up to `n` parallel chains.
struct Job {
    coef: f64,
    phase: Phase,
}

impl Job {
    fn start(coef: f64, m: &MonomialSpec, n: usize, x: &[Value]) -> Job {
        let factors = m.factors();
        let k = factors.len();
        if k == 0 {
            return Job { coef, phase: Phase::Done(Value::constant(1.0)) };
        }
        let chains = n.min(k.div_ceil(2)).max(1);
        let mut pending: Vec<VecDeque<usize>> = vec![VecDeque::new(); chains];
        for (i, f) in factors.into_iter().enumerate() {
            pending[i % chains].push_back(f);
        }
        let values = pending.iter_mut().map(|q| x[q.pop_front().expect("every chain has a factor")].clone()).collect();
        Job { coef, phase: Phase::Chains { values, pending } }
    }

    /// Advances through phases that need no new layer.
    fn settle(&mut self) {
        loop {
            match &mut self.phase {
                Phase::Chains { values, pending } if pending.iter().all(VecDeque::is_empty) => {
                    self.phase = Phase::Tree(std::mem::take(values));
                }
                Phase::Tree(values) if values.len() == 1 => {
                    self.phase = Phase::Done(values.pop().expect("one value"));
                }
                _ => return,
            }
        }
    }

    fn needs_inputs(&self) -> bool {
        matches!(self.phase, Phase::Chains { .. })
    }

    fn step(&mut self, layer: &mut LayerBuilder, x: &[Value]) {
        match &mut self.phase {
            Phase::Chains { values, pending } => {
                for (v, q) in values.iter_mut().zip(pending.iter_mut()) {
                    *v = match q.pop_front() {
                        Some(f) => layer.mul(v, &x[f]),
                        None => layer.carry(v),
                    };
                }
            }
            Phase::Tree(values) => {
                let next = values
                    .chunks(2)
                    .map(|pair| match pair {
                        [u, v] => layer.mul(u, v),
                        [u] => layer.carry(u),
                        _ => unreachable!(),
                    })
                    .collect();
                *values = next;
            }
            Phase::Done(_) => {}
        }
    }
}

/// Schedules every term on `rows` parallel slots sharing the input carry
/// channels and one accumulator channel.
fn assemble(dim: usize, terms: &[(f64, MonomialSpec)], rows: usize, n: usize) -> Result<NetworkParams> {
    let mut circuit = Circuit::new(dim);
    let mut x = circuit.inputs();
    let mut queues: Vec<VecDeque<&(f64, MonomialSpec)>> = vec![VecDeque::new(); rows.max(1)];
    for (j, t) in terms.iter().enumerate() {
        queues[j % rows.max(1)].push_back(t);
    }
    let mut active: Vec<Option<Job>> = (0..queues.len()).map(|_| None).collect();
    let mut acc = Value::constant(0.0);
    loop {
        for (slot, queue) in active.iter_mut().zip(queues.iter_mut()) {
            loop {
                if slot.is_none() {
                    match queue.pop_front() {
                        Some((c, m)) => *slot = Some(Job::start(*c, m, n, &x)),
                        None => break,
                    }
                }
                let job = slot.as_mut().expect("slot filled above");
                job.settle();
                if let Phase::Done(v) = &job.phase {
                    acc = acc.plus(&v.scaled(job.coef));
                    *slot = None;
                } else {
                    break;
                }
            }
        }
        if active.iter().all(Option::is_none) {
            break;
        }
        let mut layer = LayerBuilder::new();
        let keep_inputs = active.iter().flatten().any(Job::needs_inputs) || queues.iter().any(|q| !q.is_empty());
        let next_x: Vec<Value> = if keep_inputs { x.iter().map(|v| layer.carry(v)).collect() } else { Vec::new() };
        for job in active.iter_mut().flatten() {
            job.step(&mut layer, &x);
        }
        acc = layer.carry(&acc);
        circuit.push(layer);
        x = next_x;
    }
    circuit.finish(acc)
}

/// Network equal to `x^alpha`, with `n` multiplications per layer over `l`
/// layers followed by a dyadic tree.
pub fn build_monomial_net(m: &MonomialSpec, n: usize, l: usize) -> Result<NetworkParams> {
    if m.dim() == 0 {
        return Err(Error::Parameter("monomial needs at least one variable".into()));
    }
    if n == 0 || l == 0 {
        return Err(capacity(format!("N and L must be positive, got N={n}, L={l}")));
    }
    let k = m.degree() as usize;
    let reach = n * l + (1usize << floor_log2(n));
    if reach < k {
        return Err(capacity(format!(
            "N·L + 2^floor(log2 N) >= |alpha| fails: {n}·{l} + {} = {reach} < {k}",
            reach - n * l
        )));
    }
    assemble(m.dim(), &[(1.0, m.clone())], 1, n)
}

/// Checks `ab >= J` and `(L - 2b - b·ceil(log2 N))·N >= b·max|alpha|`.
pub fn polynomial_capacity(p: &PolynomialSpec, n: usize, l: usize) -> Result<()> {
    let (a, b, j) = (p.rows, p.columns, p.terms.len());
    if n == 0 || l == 0 || a == 0 || b == 0 {
        return Err(capacity(format!("N, L, a, b must be positive, got N={n}, L={l}, a={a}, b={b}")));
    }
    if a * b < j {
        return Err(capacity(format!("a·b >= J fails: {a}·{b} < {j}")));
    }
    let lhs = (l as i64 - 2 * b as i64 - b as i64 * ceil_log2(n) as i64) * n as i64;
    let rhs = b as i64 * p.max_degree() as i64;
    if lhs < rhs {
        return Err(capacity(format!(
            "(L - 2b - b·ceil(log2 N))·N >= b·max|alpha| fails: ({l} - {} - {})·{n} = {lhs} < {rhs}",
            2 * b,
            b as u32 * ceil_log2(n)
        )));
    }
    Ok(())
}

/// Network equal to `P(x)` with at most `a` monomial blocks running side by
/// side and a running-sum channel.
pub fn build_polynomial_net(p: &PolynomialSpec, n: usize, l: usize) -> Result<NetworkParams> {
    p.check()?;
    polynomial_capacity(p, n, l)?;
    assemble(p.dim, &p.terms, p.rows, n)
}
