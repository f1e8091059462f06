//! Layer-by-layer assembly of exact constructive networks.

use ndarray::{Array1, Array2};

use crate::activations::BasicActivation;
use crate::error::Result;
use crate::networks::{HiddenLayer, LayerActivation, NetworkParams};

/// An affine form over the outputs of the current layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Value {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Value {
    pub fn constant(c: f64) -> Self {
        Value { terms: Vec::new(), constant: c }
    }

    pub fn unit(index: usize) -> Self {
        Value { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Value {
        Value { terms: self.terms.iter().map(|&(i, w)| (i, c * w)).collect(), constant: c * self.constant }
    }

    pub fn plus(&self, other: &Value) -> Value {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Value { terms, constant: self.constant + other.constant }
    }
}

struct Neuron {
    kind: BasicActivation,
    input: Value,
}

/// Builds one hidden layer from values living on the previous layer.
pub(crate) struct LayerBuilder {
    neurons: Vec<Neuron>,
}

impl LayerBuilder {
    pub fn new() -> Self {
        LayerBuilder { neurons: Vec::new() }
    }

    /// `kind(input)` as a single neuron.
    pub fn neuron(&mut self, kind: BasicActivation, input: Value) -> Value {
        self.neurons.push(Neuron { kind, input });
        Value::unit(self.neurons.len() - 1)
    }

    /// Passes `v` through an identity neuron; constants need no neuron.
    pub fn carry(&mut self, v: &Value) -> Value {
        if v.is_constant() {
            return v.clone();
        }
        self.neuron(BasicActivation::Identity, v.clone())
    }

    /// `u v = ((u + v)^2 - (u - v)^2) / 4`, or a scaled carry when either
    /// factor is constant.
    pub fn mul(&mut self, u: &Value, v: &Value) -> Value {
        if u.is_constant() {
            return self.carry(v).scaled(u.constant);
        }
        if v.is_constant() {
            return self.carry(u).scaled(v.constant);
        }
        let p = self.neuron(BasicActivation::Square, u.plus(v));
        let m = self.neuron(BasicActivation::Square, u.plus(&v.scaled(-1.0)));
        p.scaled(0.25).plus(&m.scaled(-0.25))
    }
}

/// Stacked layers with an output form over the last one.
pub(crate) struct Circuit {
    input_dim: usize,
    layers: Vec<(Array2<f64>, Array1<f64>, Vec<BasicActivation>)>,
    prev_width: usize,
}

impl Circuit {
    pub fn new(input_dim: usize) -> Self {
        Circuit { input_dim, layers: Vec::new(), prev_width: input_dim }
    }

    /// Values for the raw inputs `x_1..x_d`.
    pub fn inputs(&self) -> Vec<Value> {
        (0..self.input_dim).map(Value::unit).collect()
    }

    /// Appends `layer`; an empty layer carries nothing and is dropped.
    pub fn push(&mut self, layer: LayerBuilder) {
        let width = layer.neurons.len();
        if width == 0 {
            return;
        }
        let mut w = Array2::zeros((width, self.prev_width));
        let mut b = Array1::zeros(width);
        let mut kinds = Vec::with_capacity(width);
        for (r, n) in layer.neurons.into_iter().enumerate() {
            for (c, coef) in n.input.terms {
                w[[r, c]] += coef;
            }
            b[r] = n.input.constant;
            kinds.push(n.kind);
        }
        self.layers.push((w, b, kinds));
        self.prev_width = width;
    }

    /// Finishes with `output` read off the last layer; a constant part or an
    /// empty circuit gets one more carrying layer.
    pub fn finish(mut self, output: Value) -> Result<NetworkParams> {
        let output = if self.layers.is_empty() || output.constant != 0.0 {
            let mut layer = LayerBuilder::new();
            let v = layer.neuron(BasicActivation::Identity, output);
            self.push(layer);
            v
        } else {
            output
        };
        let mut a = Array1::zeros(self.prev_width);
        for (i, c) in output.terms {
            a[i] += c;
        }
        let layers = self
            .layers
            .into_iter()
            .map(|(w, b, kinds)| {
                let n = kinds.len();
                let mut layer = HiddenLayer::new(w, b, LayerActivation::single(kinds, vec![1.0; n]));
                layer.train_weight = true;
                layer
            })
            .collect();
        NetworkParams::fnn(self.input_dim, layers, a)
    }
}
