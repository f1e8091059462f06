//! FNN and ResNet architectures, initialization and boundary-enforcing
//! wrappers.

mod params;
mod wrap;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{
    partition_layer, sample_raf, BasicActivation, PartitionAssignment, RafSpec, RafTerm, RafTermInit,
};
use crate::error::{param_err, Result};

pub use params::{Architecture, HiddenLayer, LayerActivation, LayerOffsets, NetworkParams, ParamLayout};
pub use wrap::{boundary_wrap, Ansatz, BoundaryDomain, BoundaryWrap};

/// Which hidden layer gets the fixed sine frequencies `2 pi, 4 pi, ...`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SineFrequencies {
    #[default]
    None,
    First,
    Last,
}

/// How hidden neurons get their activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationConfig {
    /// Each neuron gets one frozen kind, round-robin over `set`.
    Partition { set: Vec<BasicActivation>, scalings: Vec<f64>, sine_frequencies: SineFrequencies },
    /// Each neuron carries its own reproducing activation sampled from `terms`.
    Raf { terms: Vec<RafTermInit>, train_alpha: bool, train_beta: bool },
}

impl ActivationConfig {
    /// Partition over `set` with the default frozen scalings.
    pub fn partition(set: &[BasicActivation]) -> Self {
        ActivationConfig::Partition {
            set: set.to_vec(),
            scalings: set.iter().map(|k| k.default_scaling()).collect(),
            sine_frequencies: SineFrequencies::None,
        }
    }

    pub fn poly_sine_gaussian() -> Self {
        ActivationConfig::partition(&BasicActivation::POLY_SINE_GAUSSIAN)
    }
}

/// Activation layout of one hidden layer before sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerActivationSpec {
    Fixed(PartitionAssignment),
    Raf { width: usize, terms: Vec<RafTermInit>, train_alpha: bool, train_beta: bool },
}

impl LayerActivationSpec {
    fn width(&self) -> usize {
        match self {
            LayerActivationSpec::Fixed(p) => p.width(),
            LayerActivationSpec::Raf { width, .. } => *width,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnSpec {
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub activations: Vec<LayerActivationSpec>,
}

/// ResNet with `2 * blocks` hidden layers of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct ResNetSpec {
    pub input_dim: usize,
    pub width: usize,
    pub blocks: usize,
    pub activations: Vec<LayerActivationSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSpec {
    Fnn(FnnSpec),
    Resnet(ResNetSpec),
}

/// Weight initialization law.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `U(-1/sqrt(n_in), 1/sqrt(n_in))` for every weight and bias.
    #[default]
    InverseSqrtFanIn,
    /// `U(-sqrt(n_in), sqrt(n_in))`.
    SqrtFanIn,
    /// First layer `U(-1/n_in, 1/n_in)`, later layers
    /// `U(-sqrt(6/n_in)/omega, sqrt(6/n_in)/omega)`; biases likewise.
    Siren { omega: f64 },
}

impl InitScheme {
    fn bound(self, fan_in: usize, first: bool) -> f64 {
        let n = fan_in as f64;
        match self {
            InitScheme::InverseSqrtFanIn => 1.0 / n.sqrt(),
            InitScheme::SqrtFanIn => n.sqrt(),
            InitScheme::Siren { .. } if first => 1.0 / n,
            InitScheme::Siren { omega } => (6.0 / n).sqrt() / omega,
        }
    }
}

fn layer_specs(widths: &[usize], config: &ActivationConfig) -> Result<Vec<LayerActivationSpec>> {
    let last = widths.len() - 1;
    widths
        .iter()
        .enumerate()
        .map(|(l, &w)| match config {
            ActivationConfig::Partition { set, scalings, sine_frequencies } => {
                let p = partition_layer(w, set, scalings)?;
                let fixed = (*sine_frequencies == SineFrequencies::First && l == 0)
                    || (*sine_frequencies == SineFrequencies::Last && l == last);
                Ok(LayerActivationSpec::Fixed(if fixed { p.with_sine_frequencies() } else { p }))
            }
            ActivationConfig::Raf { terms, train_alpha, train_beta } => {
                if terms.is_empty() {
                    return Err(param_err("reproducing activation needs at least one term"));
                }
                for t in terms {
                    t.alpha.validate()?;
                    t.beta.validate()?;
                }
                Ok(LayerActivationSpec::Raf {
                    width: w,
                    terms: terms.clone(),
                    train_alpha: *train_alpha,
                    train_beta: *train_beta,
                })
            }
        })
        .collect()
}

pub fn build_fnn(input_dim: usize, widths: &[usize], config: &ActivationConfig) -> Result<FnnSpec> {
    if widths.is_empty() {
        return Err(param_err("hidden widths must be nonempty"));
    }
    if input_dim == 0 || widths.contains(&0) {
        return Err(param_err("input dimension and widths must be positive"));
    }
    Ok(FnnSpec { input_dim, widths: widths.to_vec(), activations: layer_specs(widths, config)? })
}

pub fn build_resnet(input_dim: usize, width: usize, blocks: usize, config: &ActivationConfig) -> Result<ResNetSpec> {
    if blocks == 0 {
        return Err(param_err("a ResNet needs at least one block"));
    }
    if input_dim == 0 || width == 0 {
        return Err(param_err("input dimension and width must be positive"));
    }
    let widths = vec![width; 2 * blocks];
    Ok(ResNetSpec { input_dim, width, blocks, activations: layer_specs(&widths, config)? })
}

impl NetworkSpec {
    pub fn input_dim(&self) -> usize {
        match self {
            NetworkSpec::Fnn(s) => s.input_dim,
            NetworkSpec::Resnet(s) => s.input_dim,
        }
    }

    fn activations(&self) -> &[LayerActivationSpec] {
        match self {
            NetworkSpec::Fnn(s) => &s.activations,
            NetworkSpec::Resnet(s) => &s.activations,
        }
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.random_range(-bound..=bound))
}

fn sample_activation(rng: &mut ChaCha8Rng, spec: &LayerActivationSpec) -> Result<LayerActivation> {
    match spec {
        LayerActivationSpec::Fixed(p) => Ok(LayerActivation::single(p.kinds.clone(), p.scalings.clone())),
        LayerActivationSpec::Raf { width, terms, train_alpha, train_beta } => {
            let rafs = (0..*width)
                .map(|_| {
                    sample_raf(terms, rng).map(|mut r| {
                        r.train_alpha = *train_alpha;
                        r.train_beta = *train_beta;
                        r
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            LayerActivation::from_rafs(&rafs)
        }
    }
}

/// Draws every weight and bias i.i.d. uniform with a fan-in dependent bound;
/// activation parameters are sampled from their tables on a separate stream.
pub fn init_params(spec: &NetworkSpec, seed: u64, scheme: InitScheme) -> Result<NetworkParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut act_rng = ChaCha8Rng::seed_from_u64(seed);
    act_rng.set_stream(1);
    let d = spec.input_dim();
    let acts = spec.activations();
    let mut layers = Vec::with_capacity(acts.len());
    let (lift, mut fan_in) = match spec {
        NetworkSpec::Fnn(_) => (None, d),
        NetworkSpec::Resnet(s) => (Some(uniform_matrix(&mut rng, s.width, d, scheme.bound(d, true))), s.width),
    };
    for (l, a) in acts.iter().enumerate() {
        let width = a.width();
        let first = l == 0 && lift.is_none();
        let bound = scheme.bound(fan_in, first);
        let weight = uniform_matrix(&mut rng, width, fan_in, bound);
        let bias = uniform_vector(&mut rng, width, bound);
        layers.push(HiddenLayer::new(weight, bias, sample_activation(&mut act_rng, a)?));
        fan_in = width;
    }
    let output = uniform_vector(&mut rng, fan_in, scheme.bound(fan_in, false));
    match lift {
        None => NetworkParams::fnn(d, layers, output),
        Some(v) => NetworkParams::resnet(v, layers, output),
    }
}

/// Random network with mixed trainable two-term reproducing activations
/// drawn from the smooth kinds. Used by gradient checks and benchmarks.
pub fn random_smooth_network(
    seed: u64,
    arch: Architecture,
    input_dim: usize,
    widths: &[usize],
) -> Result<NetworkParams> {
    const SMOOTH: [BasicActivation; 6] = [
        BasicActivation::Identity,
        BasicActivation::Square,
        BasicActivation::Sine,
        BasicActivation::Cosine,
        BasicActivation::Gaussian,
        BasicActivation::GaussianWindow,
    ];
    if widths.is_empty() {
        return Err(param_err("hidden widths must be nonempty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut act_rng = ChaCha8Rng::seed_from_u64(seed);
    act_rng.set_stream(1);
    let mut layers = Vec::with_capacity(widths.len());
    let (lift, mut fan_in) = match arch {
        Architecture::Fnn => (None, input_dim),
        Architecture::Resnet => {
            let b = 1.0 / (input_dim as f64).sqrt();
            (Some(uniform_matrix(&mut rng, widths[0], input_dim, b)), widths[0])
        }
    };
    for &w in widths {
        let b = 1.0 / (fan_in as f64).sqrt();
        let weight = uniform_matrix(&mut rng, w, fan_in, b);
        let bias = uniform_vector(&mut rng, w, b);
        let rafs: Vec<RafSpec> = (0..w)
            .map(|_| RafSpec {
                terms: (0..2)
                    .map(|_| RafTerm {
                        kind: SMOOTH[act_rng.random_range(0..SMOOTH.len())],
                        alpha: act_rng.random_range(-1.0..1.0),
                        beta: act_rng.random_range(0.5..1.5),
                    })
                    .collect(),
                train_alpha: true,
                train_beta: true,
            })
            .collect();
        layers.push(HiddenLayer::new(weight, bias, LayerActivation::from_rafs(&rafs)?));
        fan_in = w;
    }
    let output = uniform_vector(&mut rng, fan_in, 1.0 / (fan_in as f64).sqrt());
    match lift {
        None => NetworkParams::fnn(input_dim, layers, output),
        Some(v) => NetworkParams::resnet(v, layers, output),
    }
}
