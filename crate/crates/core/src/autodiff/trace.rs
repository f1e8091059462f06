//! Batched evaluation graphs over network layers.
//!
//! Every node holds a block of shape `rows x (C * B)` for a batch of `B`
//! points: column `c * B + b` carries component `c` of sample `b`, where
//! component 0 is the value, `1..=d` the first derivatives and `d+1..=2d` the
//! pure second derivatives (present depending on [`DerivOrder`]).

use std::ptr;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::jet::{Jet, JetFn, MAX_DIM};
use crate::activations::combined_derivatives;
use crate::error::{param_err, Error, Result};
use crate::networks::{NetworkParams, ParamLayout};

pub type NodeId = usize;

/// Highest input derivative propagated by a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DerivOrder {
    Value,
    Gradient,
    Laplacian,
}

impl DerivOrder {
    pub fn components(self, dim: usize) -> usize {
        match self {
            DerivOrder::Value => 1,
            DerivOrder::Gradient => 1 + dim,
            DerivOrder::Laplacian => 1 + 2 * dim,
        }
    }

    fn activation_order(self) -> usize {
        match self {
            DerivOrder::Value => 0,
            DerivOrder::Gradient => 1,
            DerivOrder::Laplacian => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Lift,
    Hidden(usize),
    Output,
}

#[derive(Clone)]
enum Op {
    Input,
    Affine { input: NodeId, net: usize, stage: Stage },
    Activate { input: NodeId, net: usize, layer: usize },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Field(JetFn),
}

/// Acyclic list of layer-level operations with a single output node. Nodes
/// can only reference earlier nodes.
#[derive(Clone)]
pub struct Graph<'a> {
    input_dim: usize,
    nets: Vec<&'a NetworkParams>,
    layouts: Vec<ParamLayout>,
    bases: Vec<usize>,
    ops: Vec<Op>,
    rows: Vec<usize>,
    output: NodeId,
}

impl<'a> Graph<'a> {
    pub fn new(input_dim: usize) -> Self {
        Graph {
            input_dim,
            nets: Vec::new(),
            layouts: Vec::new(),
            bases: Vec::new(),
            ops: vec![Op::Input],
            rows: vec![input_dim],
            output: 0,
        }
    }

    /// Graph of a single network applied to the input.
    pub fn of(net: &'a NetworkParams) -> Self {
        let mut g = Graph::new(net.input_dim);
        let out = g.network(net, g.input()).expect("input arity matches the network");
        g.set_output(out);
        g
    }

    pub fn input(&self) -> NodeId {
        0
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output(&self) -> NodeId {
        self.output
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn set_output(&mut self, node: NodeId) {
        assert!(node < self.ops.len(), "unknown node {node}");
        assert_eq!(self.rows[node], 1, "the output node must be scalar");
        self.output = node;
    }

    /// Total number of trainable scalars over all networks in the graph.
    pub fn param_count(&self) -> usize {
        self.layouts.iter().map(|l| l.len).sum()
    }

    /// Trainable vectors of every network, concatenated in insertion order.
    pub fn trainable_vector(&self) -> Vec<f64> {
        self.nets.iter().flat_map(|n| n.trainable_vector()).collect()
    }

    fn push(&mut self, op: Op, rows: usize) -> NodeId {
        self.ops.push(op);
        self.rows.push(rows);
        self.ops.len() - 1
    }

    fn net_index(&mut self, net: &'a NetworkParams) -> usize {
        if let Some(i) = self.nets.iter().position(|n| ptr::eq(*n, net)) {
            return i;
        }
        let base = self.param_count();
        self.nets.push(net);
        self.layouts.push(net.layout());
        self.bases.push(base);
        self.nets.len() - 1
    }

    /// Appends the layers of `net` applied to `input`; returns the scalar
    /// output node.
    pub fn network(&mut self, net: &'a NetworkParams, input: NodeId) -> Result<NodeId> {
        net.check()?;
        if self.rows[input] != net.input_dim {
            return Err(Error::Dimension { expected: net.input_dim, got: self.rows[input] });
        }
        let id = self.net_index(net);
        let mut h = input;
        let mut skip = None;
        if let Some(v) = &net.lift {
            h = self.push(Op::Affine { input, net: id, stage: Stage::Lift }, v.nrows());
            skip = Some(h);
        }
        for (l, layer) in net.layers.iter().enumerate() {
            let n = layer.width();
            let z = self.push(Op::Affine { input: h, net: id, stage: Stage::Hidden(l) }, n);
            let g = self.push(Op::Activate { input: z, net: id, layer: l }, n);
            h = match skip {
                // layers are numbered from 1: even layers add h_{l-2}
                Some(prev) if (l + 1) % 2 == 0 => {
                    let sum = self.add(prev, g);
                    skip = Some(sum);
                    sum
                }
                Some(_) => g,
                None => g,
            };
        }
        Ok(self.push(Op::Affine { input: h, net: id, stage: Stage::Output }, 1))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.rows[a], self.rows[b], "added nodes must have equal rows");
        self.push(Op::Add(a, b), self.rows[a])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.rows[a], self.rows[b], "multiplied nodes must have equal rows");
        self.push(Op::Mul(a, b), self.rows[a])
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.push(Op::Scale(a, c), self.rows[a])
    }

    /// A closed-form scalar field of the input point; carries no parameters.
    pub fn field(&mut self, f: JetFn) -> NodeId {
        self.push(Op::Field(f), 1)
    }

    fn stage_weight(&self, net: usize, stage: Stage) -> ArrayView2<'_, f64> {
        let n = self.nets[net];
        match stage {
            Stage::Lift => n.lift.as_ref().expect("lift present").view(),
            Stage::Hidden(l) => n.layers[l].weight.view(),
            Stage::Output => n.output.view().insert_axis(Axis(0)),
        }
    }

    /// Forward pass over `points` (one sample per row). With `differentiable`
    /// set, activation derivatives needed by [`EvalTrace::backward`] are
    /// cached; otherwise non-differentiable kinds are allowed at value order.
    pub fn forward(
        &self,
        points: ArrayView2<'_, f64>,
        order: DerivOrder,
        differentiable: bool,
    ) -> Result<EvalTrace<'_, 'a>> {
        let d = self.input_dim;
        if points.ncols() != d {
            return Err(Error::Dimension { expected: d, got: points.ncols() });
        }
        let batch = points.nrows();
        if batch == 0 {
            return Err(param_err("empty batch"));
        }
        let comps = order.components(d);
        let act_order = order.activation_order() + usize::from(differentiable);
        let mut values: Vec<Array2<f64>> = Vec::with_capacity(self.ops.len());
        let mut caches: Vec<Vec<Array2<f64>>> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let mut cache = Vec::new();
            let out = match op {
                Op::Input => {
                    let mut z = Array2::zeros((d, comps * batch));
                    z.slice_mut(s![.., ..batch]).assign(&points.t());
                    if order >= DerivOrder::Gradient {
                        for k in 0..d {
                            z.slice_mut(s![k, (1 + k) * batch..(2 + k) * batch]).fill(1.0);
                        }
                    }
                    z
                }
                Op::Affine { input, net, stage } => {
                    let h = &values[*input];
                    let mut z = self.stage_weight(*net, *stage).dot(h);
                    if let Stage::Hidden(l) = stage {
                        let bias = &self.nets[*net].layers[*l].bias;
                        let mut head = z.slice_mut(s![.., ..batch]);
                        head += &bias.view().insert_axis(Axis(1));
                    }
                    z
                }
                Op::Activate { input, net, layer } => {
                    let act = &self.nets[*net].layers[*layer].activation;
                    let (out, c) = activate_forward(act, &values[*input], d, batch, order, act_order)?;
                    cache = c;
                    out
                }
                Op::Add(a, b) => &values[*a] + &values[*b],
                Op::Mul(a, b) => jet_product(&values[*a], &values[*b], d, batch, order),
                Op::Scale(a, c) => &values[*a] * *c,
                Op::Field(f) => {
                    if d > MAX_DIM {
                        return Err(param_err(format!("closed-form fields support at most {MAX_DIM} inputs")));
                    }
                    let mut z = Array2::zeros((1, comps * batch));
                    for (b, x) in points.rows().into_iter().enumerate() {
                        let x = x.to_vec();
                        let j = f(&Jet::coordinates(&x));
                        write_jet(&mut z, 0, b, batch, order, &j);
                    }
                    z
                }
            };
            if !all_finite(&out) {
                return Err(Error::NumericOverflow(format!("non-finite value at graph node {}", values.len())));
            }
            values.push(out);
            caches.push(cache);
        }
        Ok(EvalTrace { graph: self, order, batch, differentiable, values, caches })
    }
}

/// `x * 0` is zero for finite `x` and NaN otherwise, so one pass without
/// branches decides the whole block.
fn all_finite(a: &Array2<f64>) -> bool {
    match a.as_slice() {
        Some(xs) => xs.iter().fold(0.0, |acc, &x| acc + x * 0.0) == 0.0,
        None => a.iter().all(|x| x.is_finite()),
    }
}

fn write_jet(z: &mut Array2<f64>, row: usize, b: usize, batch: usize, order: DerivOrder, j: &Jet) {
    let d = j.dim;
    z[[row, b]] = j.value;
    if order >= DerivOrder::Gradient {
        for k in 0..d {
            z[[row, (1 + k) * batch + b]] = j.grad[k];
        }
    }
    if order >= DerivOrder::Laplacian {
        for k in 0..d {
            z[[row, (1 + d + k) * batch + b]] = j.diag[k];
        }
    }
}

fn read_jet(z: &Array2<f64>, row: usize, b: usize, batch: usize, d: usize, order: DerivOrder) -> Jet {
    let mut j = Jet::constant(z[[row, b]], d.min(MAX_DIM));
    if order >= DerivOrder::Gradient {
        for k in 0..d.min(MAX_DIM) {
            j.grad[k] = z[[row, (1 + k) * batch + b]];
        }
    }
    if order >= DerivOrder::Laplacian {
        for k in 0..d.min(MAX_DIM) {
            j.diag[k] = z[[row, (1 + d + k) * batch + b]];
        }
    }
    j
}

type Caches = Vec<Array2<f64>>;

/// Applies the layer activation to a jet block. The cache holds
/// `s^(1), ..., s^(act_order)` at the pre-activation values.
fn activate_forward(
    act: &crate::networks::LayerActivation,
    z: &Array2<f64>,
    d: usize,
    batch: usize,
    order: DerivOrder,
    act_order: usize,
) -> Result<(Array2<f64>, Caches)> {
    let n = z.nrows();
    let mut out = Array2::zeros(z.raw_dim());
    let mut cache: Caches = (0..act_order).map(|_| Array2::zeros((n, batch))).collect();
    let zs = z.as_slice().expect("standard layout");
    let width = z.ncols();
    let os = out.as_slice_mut().expect("standard layout");
    let mut cs: Vec<&mut [f64]> = cache.iter_mut().map(|c| c.as_slice_mut().expect("standard layout")).collect();
    let mut d1 = vec![0.0; batch];
    let mut d2 = vec![0.0; batch];
    for i in 0..n {
        let zr = &zs[i * width..(i + 1) * width];
        let or = &mut os[i * width..(i + 1) * width];
        let (kinds, alpha, beta) = act.neuron_tables(i);
        if let ([kind], [a], [b]) = (kinds, alpha, beta) {
            let c = kind.effective_scale(*b);
            let (ac, acc) = (a * c, a * c * c);
            let c3 = acc * c;
            for s in 0..batch {
                let sd = kind.derivatives(c * zr[s], act_order)?;
                or[s] = a * sd[0];
                d1[s] = ac * sd[1];
                d2[s] = acc * sd[2];
                if act_order > 2 {
                    cs[2][i * batch + s] = c3 * sd[3];
                }
            }
        } else {
            for s in 0..batch {
                let sd = combined_derivatives(kinds, alpha, beta, zr[s], act_order)?;
                or[s] = sd[0];
                d1[s] = sd[1];
                d2[s] = sd[2];
                if act_order > 2 {
                    cs[2][i * batch + s] = sd[3];
                }
            }
        }
        if act_order > 0 {
            cs[0][i * batch..(i + 1) * batch].copy_from_slice(&d1);
        }
        if act_order > 1 {
            cs[1][i * batch..(i + 1) * batch].copy_from_slice(&d2);
        }
        if order >= DerivOrder::Gradient {
            for k in 0..d {
                let g = (1 + k) * batch;
                for s in 0..batch {
                    or[g + s] = d1[s] * zr[g + s];
                }
            }
        }
        if order >= DerivOrder::Laplacian {
            for k in 0..d {
                let g = (1 + k) * batch;
                let h = (1 + d + k) * batch;
                for s in 0..batch {
                    let gz = zr[g + s];
                    or[h + s] = d2[s] * gz * gz + d1[s] * zr[h + s];
                }
            }
        }
    }
    Ok((out, cache))
}

fn jet_product(a: &Array2<f64>, b: &Array2<f64>, d: usize, batch: usize, order: DerivOrder) -> Array2<f64> {
    let mut out = Array2::zeros(a.raw_dim());
    for i in 0..a.nrows() {
        for s in 0..batch {
            let (av, bv) = (a[[i, s]], b[[i, s]]);
            out[[i, s]] = av * bv;
            if order >= DerivOrder::Gradient {
                for k in 0..d {
                    let gi = (1 + k) * batch + s;
                    out[[i, gi]] = a[[i, gi]] * bv + av * b[[i, gi]];
                }
            }
            if order >= DerivOrder::Laplacian {
                for k in 0..d {
                    let gi = (1 + k) * batch + s;
                    let hi = (1 + d + k) * batch + s;
                    out[[i, hi]] = a[[i, hi]] * bv + 2.0 * a[[i, gi]] * b[[i, gi]] + av * b[[i, hi]];
                }
            }
        }
    }
    out
}

/// Adjoint of `a` in `a * b` given the output adjoint `o`.
fn jet_product_adjoint(o: &Array2<f64>, b: &Array2<f64>, d: usize, batch: usize, order: DerivOrder) -> Array2<f64> {
    let mut abar = Array2::zeros(o.raw_dim());
    for i in 0..o.nrows() {
        for s in 0..batch {
            let bv = b[[i, s]];
            let mut v = o[[i, s]] * bv;
            if order >= DerivOrder::Gradient {
                for k in 0..d {
                    let gi = (1 + k) * batch + s;
                    v += o[[i, gi]] * b[[i, gi]];
                    abar[[i, gi]] = o[[i, gi]] * bv;
                }
            }
            if order >= DerivOrder::Laplacian {
                for k in 0..d {
                    let gi = (1 + k) * batch + s;
                    let hi = (1 + d + k) * batch + s;
                    v += o[[i, hi]] * b[[i, hi]];
                    abar[[i, gi]] += 2.0 * o[[i, hi]] * b[[i, gi]];
                    abar[[i, hi]] = o[[i, hi]] * bv;
                }
            }
            abar[[i, s]] = v;
        }
    }
    abar
}

/// Values of every node from one forward pass.
pub struct EvalTrace<'g, 'a> {
    graph: &'g Graph<'a>,
    order: DerivOrder,
    batch: usize,
    differentiable: bool,
    values: Vec<Array2<f64>>,
    caches: Vec<Caches>,
}

impl EvalTrace<'_, '_> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn order(&self) -> DerivOrder {
        self.order
    }

    /// Output values, one per sample.
    pub fn values(&self) -> Vec<f64> {
        self.values[self.graph.output].slice(s![0, ..self.batch]).to_vec()
    }

    /// Output jet of sample `b`.
    pub fn jet(&self, b: usize) -> Jet {
        read_jet(&self.values[self.graph.output], 0, b, self.batch, self.graph.input_dim, self.order)
    }

    pub fn jets(&self) -> Vec<Jet> {
        (0..self.batch).map(|b| self.jet(b)).collect()
    }

    /// Gradient of `sum_b <seeds[b], output jet of b>` with respect to every
    /// trainable parameter, in the graph's canonical order.
    pub fn backward(&self, seeds: &[Jet]) -> Result<Vec<f64>> {
        if !self.differentiable {
            return Err(param_err("trace was recorded without derivative caches"));
        }
        if seeds.len() != self.batch {
            return Err(Error::Dimension { expected: self.batch, got: seeds.len() });
        }
        let g = self.graph;
        let d = g.input_dim;
        let batch = self.batch;
        let order = self.order;
        let mut grad = vec![0.0; g.param_count()];
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; g.ops.len()];
        let mut seed = Array2::zeros((1, order.components(d) * batch));
        for (b, j) in seeds.iter().enumerate() {
            write_jet(&mut seed, 0, b, batch, order, j);
        }
        adj[g.output] = Some(seed);

        fn accumulate(slot: &mut Option<Array2<f64>>, v: Array2<f64>) {
            match slot {
                Some(a) => *a += &v,
                None => *slot = Some(v),
            }
        }

        for id in (0..g.ops.len()).rev() {
            let Some(a) = adj[id].take() else { continue };
            match &g.ops[id] {
                Op::Input | Op::Field(_) => {}
                Op::Add(x, y) => {
                    accumulate(&mut adj[*y], a.clone());
                    accumulate(&mut adj[*x], a);
                }
                Op::Scale(x, c) => accumulate(&mut adj[*x], a * *c),
                Op::Mul(x, y) => {
                    let ax = jet_product_adjoint(&a, &self.values[*y], d, batch, order);
                    let ay = jet_product_adjoint(&a, &self.values[*x], d, batch, order);
                    accumulate(&mut adj[*x], ax);
                    accumulate(&mut adj[*y], ay);
                }
                Op::Affine { input, net, stage } => {
                    let h = &self.values[*input];
                    let base = g.bases[*net];
                    let layout = &g.layouts[*net];
                    let (w_off, b_off) = match stage {
                        Stage::Lift => (layout.lift, None),
                        Stage::Hidden(l) => (layout.layers[*l].weight, layout.layers[*l].bias),
                        Stage::Output => (layout.output, None),
                    };
                    if let Some(off) = w_off {
                        let wbar = a.dot(&h.t());
                        let dst = &mut grad[base + off..base + off + wbar.len()];
                        for (o, v) in dst.iter_mut().zip(wbar.iter()) {
                            *o += v;
                        }
                    }
                    if let Some(off) = b_off {
                        let bbar: Array1<f64> = a.slice(s![.., ..batch]).sum_axis(Axis(1));
                        for (o, v) in grad[base + off..base + off + bbar.len()].iter_mut().zip(bbar.iter()) {
                            *o += v;
                        }
                    }
                    if !matches!(g.ops[*input], Op::Input) {
                        let w = g.stage_weight(*net, *stage);
                        accumulate(&mut adj[*input], w.t().dot(&a));
                    }
                }
                Op::Activate { input, net, layer } => {
                    let act = &g.nets[*net].layers[*layer].activation;
                    let offsets = g.layouts[*net].layers[*layer];
                    let base = g.bases[*net];
                    let zbar = activate_backward(
                        act,
                        &self.values[*input],
                        &self.caches[id],
                        &a,
                        d,
                        batch,
                        order,
                        offsets.alpha.map(|o| base + o),
                        offsets.beta.map(|o| base + o),
                        &mut grad,
                    )?;
                    accumulate(&mut adj[*input], zbar);
                }
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow("non-finite parameter gradient".into()));
        }
        Ok(grad)
    }
}

/// Reverse pass through a jet activation. With per-element sums
/// `q0 = A_v`, `q1 = sum_k A_g g + A_h h`, `q2 = sum_k A_h g^2` the
/// sensitivity of the output to any scalar `t` of the activation is
/// `q0 ds/dt + q1 ds'/dt + q2 ds''/dt`.
#[allow(clippy::too_many_arguments)]
fn activate_backward(
    act: &crate::networks::LayerActivation,
    z: &Array2<f64>,
    cache: &Caches,
    a: &Array2<f64>,
    d: usize,
    batch: usize,
    order: DerivOrder,
    alpha_off: Option<usize>,
    beta_off: Option<usize>,
    grad: &mut [f64],
) -> Result<Array2<f64>> {
    let n = z.nrows();
    let width = z.ncols();
    let mut zbar = Array2::zeros(z.raw_dim());
    let terms = act.terms;
    let top = order.activation_order();
    let zs = z.as_slice().expect("standard layout");
    let as_ = a.as_slice().expect("standard layout");
    let cs: Vec<&[f64]> = cache.iter().map(|c| c.as_slice().expect("standard layout")).collect();
    let mut q1 = vec![0.0; batch];
    let mut q2 = vec![0.0; batch];
    for i in 0..n {
        let zr = &zs[i * width..(i + 1) * width];
        let ar = &as_[i * width..(i + 1) * width];
        let mut zbr = zbar.row_mut(i);
        let zb = zbr.as_slice_mut().expect("standard layout");
        let (kinds, alphas, betas) = act.neuron_tables(i);
        let s1 = &cs[0][i * batch..(i + 1) * batch];
        for b in 0..batch {
            zb[b] = ar[b] * s1[b];
        }
        q1.fill(0.0);
        q2.fill(0.0);
        if top >= 1 {
            let s2 = &cs[1][i * batch..(i + 1) * batch];
            for k in 0..d {
                let g = (1 + k) * batch;
                for b in 0..batch {
                    let ag = ar[g + b];
                    q1[b] += ag * zr[g + b];
                    zb[g + b] = ag * s1[b];
                }
            }
            if top >= 2 {
                let s3 = &cs[2][i * batch..(i + 1) * batch];
                for k in 0..d {
                    let g = (1 + k) * batch;
                    let h = (1 + d + k) * batch;
                    for b in 0..batch {
                        let (ah, gz) = (ar[h + b], zr[g + b]);
                        q1[b] += ah * zr[h + b];
                        q2[b] += ah * gz * gz;
                        zb[g + b] += 2.0 * ah * s2[b] * gz;
                        zb[h + b] = ah * s1[b];
                    }
                }
                for b in 0..batch {
                    zb[b] += q2[b] * s3[b];
                }
            }
            for b in 0..batch {
                zb[b] += q1[b] * s2[b];
            }
        }
        if alpha_off.is_none() && beta_off.is_none() {
            continue;
        }
        for b in 0..batch {
            let (q0, q1, q2) = (ar[b], q1[b], q2[b]);
            let u = zr[b];
            let q = [q0, q1, q2];
            for p in 0..terms {
                let kind = kinds[p];
                let (al, be) = (alphas[p], betas[p]);
                let c = kind.effective_scale(be);
                let gd = kind.derivatives(c * u, top + 1)?;
                if let Some(off) = alpha_off {
                    // d s^(m) / d alpha = c^m gamma^(m)(c u)
                    let mut cm = 1.0;
                    let mut acc = 0.0;
                    for m in 0..=top {
                        acc += q[m] * cm * gd[m];
                        cm *= c;
                    }
                    grad[off + i * terms + p] += acc;
                }
                if let Some(off) = beta_off {
                    // d s^(m) / d c = alpha (m c^(m-1) gamma^(m) + c^m u gamma^(m+1))
                    let mut acc = 0.0;
                    let mut cm1 = 0.0;
                    let mut cm = 1.0;
                    for m in 0..=top {
                        acc += q[m] * al * (m as f64 * cm1 * gd[m] + cm * u * gd[m + 1]);
                        cm1 = cm;
                        cm *= c;
                    }
                    grad[off + i * terms + p] += acc * kind.effective_scale_slope(be);
                }
            }
        }
    }
    Ok(zbar)
}
