//! Concrete network parameters and their canonical flattening.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::activations::{BasicActivation, RafSpec};
use crate::error::{param_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Fnn,
    Resnet,
}

/// Activations of one hidden layer: neuron `i` applies
/// `sum_p alpha[i, p] * kinds[i * terms + p](beta[i, p] * z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivation {
    pub kinds: Vec<BasicActivation>,
    pub terms: usize,
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    pub train_alpha: bool,
    pub train_beta: bool,
}

impl LayerActivation {
    /// Every neuron applies `kind` with unit coefficient and scaling, frozen.
    pub fn uniform(kind: BasicActivation, width: usize) -> Self {
        LayerActivation::single(vec![kind; width], vec![1.0; width])
    }

    /// One frozen kind per neuron with the given scalings.
    pub fn single(kinds: Vec<BasicActivation>, scalings: Vec<f64>) -> Self {
        let width = kinds.len();
        LayerActivation {
            kinds,
            terms: 1,
            alpha: Array2::ones((width, 1)),
            beta: Array2::from_shape_vec((width, 1), scalings).expect("one scaling per neuron"),
            train_alpha: false,
            train_beta: false,
        }
    }

    /// Stacks per-neuron reproducing activations, which must share their
    /// kinds and trainable flags.
    pub fn from_rafs(rafs: &[RafSpec]) -> Result<Self> {
        let first = rafs.first().ok_or_else(|| param_err("layer has no neurons"))?;
        let terms = first.terms.len();
        let mut kinds = Vec::with_capacity(rafs.len() * terms);
        let mut alpha = Array2::zeros((rafs.len(), terms));
        let mut beta = Array2::zeros((rafs.len(), terms));
        for (i, raf) in rafs.iter().enumerate() {
            raf.validate()?;
            if raf.terms.len() != terms || raf.train_alpha != first.train_alpha || raf.train_beta != first.train_beta {
                return Err(param_err("neurons of one layer must share the activation layout"));
            }
            for (p, t) in raf.terms.iter().enumerate() {
                kinds.push(t.kind);
                alpha[[i, p]] = t.alpha;
                beta[[i, p]] = t.beta;
            }
        }
        Ok(LayerActivation { kinds, terms, alpha, beta, train_alpha: first.train_alpha, train_beta: first.train_beta })
    }

    pub fn width(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn neuron_kinds(&self, i: usize) -> &[BasicActivation] {
        &self.kinds[i * self.terms..(i + 1) * self.terms]
    }

    /// The reproducing activation of neuron `i`.
    pub fn neuron(&self, i: usize) -> RafSpec {
        RafSpec {
            terms: (0..self.terms)
                .map(|p| crate::activations::RafTerm {
                    kind: self.kinds[i * self.terms + p],
                    alpha: self.alpha[[i, p]],
                    beta: self.beta[[i, p]],
                })
                .collect(),
            train_alpha: self.train_alpha,
            train_beta: self.train_beta,
        }
    }

    /// Kinds, `alpha` and `beta` of neuron `i`.
    pub(crate) fn neuron_tables(&self, i: usize) -> (&[BasicActivation], &[f64], &[f64]) {
        let t = self.terms;
        let alpha = self.alpha.as_slice().expect("standard layout");
        let beta = self.beta.as_slice().expect("standard layout");
        (self.neuron_kinds(i), &alpha[i * t..(i + 1) * t], &beta[i * t..(i + 1) * t])
    }

    fn check(&self) -> Result<()> {
        let width = self.width();
        if self.terms == 0
            || self.kinds.len() != width * self.terms
            || self.alpha.dim() != (width, self.terms)
            || self.beta.dim() != (width, self.terms)
        {
            return Err(param_err("activation tables disagree on width or term count"));
        }
        Ok(())
    }
}

/// `z = W h + b` followed by the layer activation.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: LayerActivation,
    pub train_weight: bool,
    pub train_bias: bool,
}

impl HiddenLayer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, activation: LayerActivation) -> Self {
        HiddenLayer { weight, bias, activation, train_weight: true, train_bias: true }
    }

    pub fn width(&self) -> usize {
        self.weight.nrows()
    }
}

/// Position of each trainable block in the flat parameter vector.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamLayout {
    pub lift: Option<usize>,
    pub layers: Vec<LayerOffsets>,
    pub output: Option<usize>,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LayerOffsets {
    pub weight: Option<usize>,
    pub bias: Option<usize>,
    pub alpha: Option<usize>,
    pub beta: Option<usize>,
}

/// Weights, biases, output vector and activation parameters of an FNN or a
/// ResNet.
///
/// FNN: `h_l = act(W_l h_{l-1} + b_l)`, `h_0 = x`, output `a . h_L`.
/// ResNet: `h_0 = V x`, `g_l = act(W_l h_{l-1} + b_l)`, `h_l = h_{l-2} + g_l`
/// for even `l` and `h_l = g_l` for odd `l`, output `a . h_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub arch: Architecture,
    pub input_dim: usize,
    pub lift: Option<Array2<f64>>,
    pub layers: Vec<HiddenLayer>,
    pub output: Array1<f64>,
    pub train_lift: bool,
    pub train_output: bool,
}

impl NetworkParams {
    pub fn fnn(input_dim: usize, layers: Vec<HiddenLayer>, output: Array1<f64>) -> Result<Self> {
        let net = NetworkParams {
            arch: Architecture::Fnn,
            input_dim,
            lift: None,
            layers,
            output,
            train_lift: false,
            train_output: true,
        };
        net.check()?;
        Ok(net)
    }

    pub fn resnet(lift: Array2<f64>, layers: Vec<HiddenLayer>, output: Array1<f64>) -> Result<Self> {
        let net = NetworkParams {
            arch: Architecture::Resnet,
            input_dim: lift.ncols(),
            lift: Some(lift),
            layers,
            output,
            train_lift: true,
            train_output: true,
        };
        net.check()?;
        Ok(net)
    }

    /// Validates every shape against the architecture.
    pub fn check(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(param_err("network needs at least one hidden layer"));
        }
        let mut prev = match (self.arch, &self.lift) {
            (Architecture::Fnn, None) => self.input_dim,
            (Architecture::Resnet, Some(v)) => {
                if v.ncols() != self.input_dim {
                    return Err(Error::Dimension { expected: self.input_dim, got: v.ncols() });
                }
                v.nrows()
            }
            (Architecture::Fnn, Some(_)) => return Err(param_err("an FNN has no lift matrix")),
            (Architecture::Resnet, None) => return Err(param_err("a ResNet needs a lift matrix")),
        };
        for layer in &self.layers {
            if layer.weight.ncols() != prev {
                return Err(Error::Dimension { expected: prev, got: layer.weight.ncols() });
            }
            let n = layer.width();
            if layer.bias.len() != n {
                return Err(Error::Dimension { expected: n, got: layer.bias.len() });
            }
            layer.activation.check()?;
            if layer.activation.width() != n {
                return Err(Error::Dimension { expected: n, got: layer.activation.width() });
            }
            if self.arch == Architecture::Resnet && n != prev {
                return Err(param_err("ResNet layers must all share one width"));
            }
            prev = n;
        }
        if self.output.len() != prev {
            return Err(Error::Dimension { expected: prev, got: self.output.len() });
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn max_width(&self) -> usize {
        let lift = self.lift.as_ref().map_or(0, |v| v.nrows());
        self.layers.iter().map(HiddenLayer::width).max().unwrap_or(0).max(lift)
    }

    pub fn layout(&self) -> ParamLayout {
        let mut len = 0;
        let mut take = |on: bool, n: usize| {
            on.then(|| {
                let at = len;
                len += n;
                at
            })
        };
        let lift = self.lift.as_ref().and_then(|v| take(self.train_lift, v.len()));
        let layers = self
            .layers
            .iter()
            .map(|l| LayerOffsets {
                weight: take(l.train_weight, l.weight.len()),
                bias: take(l.train_bias, l.bias.len()),
                alpha: take(l.activation.train_alpha, l.activation.alpha.len()),
                beta: take(l.activation.train_beta, l.activation.beta.len()),
            })
            .collect();
        let output = take(self.train_output, self.output.len());
        ParamLayout { lift, layers, output, len }
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.layout().len
    }

    /// Number of scalars including frozen ones.
    pub fn total_count(&self) -> usize {
        self.lift.as_ref().map_or(0, |v| v.len())
            + self
                .layers
                .iter()
                .map(|l| l.weight.len() + l.bias.len() + l.activation.alpha.len() + l.activation.beta.len())
                .sum::<usize>()
            + self.output.len()
    }

    fn blocks(&self) -> Vec<(bool, &[f64])> {
        fn slice(a: &Array2<f64>) -> &[f64] {
            a.as_slice().expect("standard layout")
        }
        let mut out = Vec::new();
        if let Some(v) = &self.lift {
            out.push((self.train_lift, slice(v)));
        }
        for l in &self.layers {
            out.push((l.train_weight, slice(&l.weight)));
            out.push((l.train_bias, l.bias.as_slice().expect("standard layout")));
            out.push((l.activation.train_alpha, slice(&l.activation.alpha)));
            out.push((l.activation.train_beta, slice(&l.activation.beta)));
        }
        out.push((self.train_output, self.output.as_slice().expect("standard layout")));
        out
    }

    fn blocks_mut(&mut self) -> Vec<(bool, &mut [f64])> {
        let mut out = Vec::new();
        if let Some(v) = &mut self.lift {
            out.push((self.train_lift, v.as_slice_mut().expect("standard layout")));
        }
        for l in &mut self.layers {
            out.push((l.train_weight, l.weight.as_slice_mut().expect("standard layout")));
            out.push((l.train_bias, l.bias.as_slice_mut().expect("standard layout")));
            out.push((l.activation.train_alpha, l.activation.alpha.as_slice_mut().expect("standard layout")));
            out.push((l.activation.train_beta, l.activation.beta.as_slice_mut().expect("standard layout")));
        }
        out.push((self.train_output, self.output.as_slice_mut().expect("standard layout")));
        out
    }

    /// Trainable scalars in canonical order: lift, then per layer weights
    /// (row-major), biases, activation coefficients and scalings, then the
    /// output vector.
    pub fn trainable_vector(&self) -> Vec<f64> {
        self.blocks().into_iter().filter(|(on, _)| *on).flat_map(|(_, v)| v.iter().copied()).collect()
    }

    /// Writes `values` back into the trainable blocks.
    pub fn set_trainable_vector(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(Error::Dimension { expected, got: values.len() });
        }
        let mut at = 0;
        for (on, block) in self.blocks_mut() {
            if on {
                block.copy_from_slice(&values[at..at + block.len()]);
                at += block.len();
            }
        }
        Ok(())
    }

    /// Every scalar, frozen ones included, in canonical order.
    pub fn all_values(&self) -> Vec<f64> {
        self.blocks().into_iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }

    /// Sets every scalar (weights, biases, output) to zero, leaving the
    /// activation tables alone.
    pub fn zero_weights(&mut self) {
        if let Some(v) = &mut self.lift {
            v.fill(0.0);
        }
        for l in &mut self.layers {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
        }
        self.output.fill(0.0);
    }

    /// Freezes every block except those selected by the caller.
    pub fn freeze_all(&mut self) {
        self.train_lift = false;
        self.train_output = false;
        for l in &mut self.layers {
            l.train_weight = false;
            l.train_bias = false;
            l.activation.train_alpha = false;
            l.activation.train_beta = false;
        }
    }

    pub fn has_kind(&self, pred: impl Fn(BasicActivation) -> bool) -> bool {
        self.layers.iter().any(|l| l.activation.kinds.iter().any(|&k| pred(k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small() -> NetworkParams {
        let act = |n| LayerActivation::uniform(BasicActivation::Sine, n);
        NetworkParams::fnn(
            2,
            vec![
                HiddenLayer::new(Array2::from_elem((3, 2), 0.5), Array1::zeros(3), act(3)),
                HiddenLayer::new(Array2::from_elem((2, 3), 0.25), Array1::ones(2), act(2)),
            ],
            array![1.0, -1.0],
        )
        .unwrap()
    }

    #[test]
    fn flatten_round_trip() {
        let mut net = small();
        assert_eq!(net.param_count(), 6 + 3 + 6 + 2 + 2);
        let v: Vec<f64> = (0..net.param_count()).map(|i| i as f64).collect();
        net.set_trainable_vector(&v).unwrap();
        assert_eq!(net.trainable_vector(), v);
        assert_eq!(net.layers[0].weight[[1, 0]], 2.0);
        assert_eq!(net.layers[0].bias[0], 6.0);
        assert_eq!(net.output[1], 18.0);
        assert!(matches!(net.set_trainable_vector(&v[1..]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn frozen_blocks_are_skipped() {
        let mut net = small();
        net.layers[0].train_bias = false;
        net.train_output = false;
        let layout = net.layout();
        assert_eq!(layout.len, 6 + 6 + 2);
        assert_eq!(layout.layers[0].bias, None);
        assert_eq!(layout.layers[1].weight, Some(6));
        assert_eq!(layout.output, None);
        assert_eq!(net.total_count(), 6 + 3 + 3 + 3 + 6 + 2 + 2 + 2 + 2);
    }

    #[test]
    fn shape_errors() {
        let act = LayerActivation::uniform(BasicActivation::Sine, 3);
        let bad = NetworkParams::fnn(
            2,
            vec![HiddenLayer::new(Array2::zeros((3, 4)), Array1::zeros(3), act)],
            Array1::zeros(3),
        );
        assert!(matches!(bad, Err(Error::Dimension { expected: 2, got: 4 })));
    }
}
