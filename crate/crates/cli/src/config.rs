//! Experiment configuration files.
//!
//! One JSON object per experiment. Every block is optional and falls back to
//! the defaults below; unknown keys anywhere in the file are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use raf_lab_core::activations::{presets, BasicActivation, RafTermInit};
use raf_lab_core::networks::{build_fnn, build_resnet, ActivationConfig, InitScheme, NetworkSpec, SineFrequencies};
use raf_lab_core::problems::{catalog, SignalFormat};
use raf_lab_core::reproduce::{AtomKind, AtomParams};
use raf_lab_core::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Train,
    Ntk,
    Reproduce,
    FitSignal,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Ntk => "ntk",
            Command::Reproduce => "reproduce",
            Command::FitSignal => "fit-signal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Command>,
    /// Catalog problem for `train` and `ntk`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalConfig>,
    pub architecture: ArchitectureConfig,
    pub activation: ActivationBlock,
    /// Weight law; defaults to `siren` with omega 30 for `fit-signal` and to
    /// `inverse_sqrt_fan_in` otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitScheme>,
    pub train: TrainConfig,
    pub ntk: NtkConfig,
    pub reproduce: ReproduceConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            subcommand: None,
            problem: None,
            signal: None,
            architecture: ArchitectureConfig::default(),
            activation: ActivationBlock::default(),
            init: None,
            train: TrainConfig::default(),
            ntk: NtkConfig::default(),
            reproduce: ReproduceConfig::default(),
            seed: None,
            seeds: None,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    #[default]
    Resnet,
    Fnn,
}

/// `resnet` uses `width` and `blocks`; `fnn` uses `widths`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchitectureConfig {
    pub kind: ArchKind,
    pub width: usize,
    pub blocks: usize,
    pub widths: Vec<usize>,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig { kind: ArchKind::Resnet, width: 50, blocks: 2, widths: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationMode {
    #[default]
    Partition,
    Raf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RafPreset {
    Sine,
    SineGaussian,
    PolySine,
    PolySineGaussian,
    Siren,
}

impl RafPreset {
    pub fn name(self) -> &'static str {
        match self {
            RafPreset::Sine => "sine",
            RafPreset::SineGaussian => "sine-gaussian",
            RafPreset::PolySine => "poly-sine",
            RafPreset::PolySineGaussian => "poly-sine-gaussian",
            RafPreset::Siren => "siren",
        }
    }

    fn terms(self) -> Vec<RafTermInit> {
        match self {
            RafPreset::Sine => presets::sine(),
            RafPreset::SineGaussian => presets::sine_gaussian(),
            RafPreset::PolySine => presets::poly_sine(),
            RafPreset::PolySineGaussian => presets::poly_sine_gaussian(),
            RafPreset::Siren => presets::siren(),
        }
    }
}

/// Partition mode gives each neuron one frozen kind from `set`; RAF mode
/// gives each neuron a trainable combination drawn from `preset` or `terms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivationBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mode: ActivationMode,
    pub set: Vec<BasicActivation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scalings: Option<Vec<f64>>,
    pub sine_frequencies: SineFrequencies,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<RafPreset>,
    pub terms: Vec<RafTermInit>,
    pub train_alpha: bool,
    pub train_beta: bool,
}

impl Default for ActivationBlock {
    fn default() -> Self {
        ActivationBlock {
            name: None,
            mode: ActivationMode::Partition,
            set: BasicActivation::POLY_SINE_GAUSSIAN.to_vec(),
            scalings: None,
            sine_frequencies: SineFrequencies::None,
            preset: None,
            terms: Vec::new(),
            train_alpha: true,
            train_beta: true,
        }
    }
}

impl ActivationBlock {
    /// Report label: the explicit name, else a description of the layout.
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match self.mode {
            ActivationMode::Partition => {
                let kinds: Vec<&str> = self.set.iter().map(|k| k.name()).collect();
                format!("partition[{}]", kinds.join(","))
            }
            ActivationMode::Raf => match self.preset {
                Some(p) => format!("raf[{}]", p.name()),
                None => {
                    let kinds: Vec<&str> = self.terms.iter().map(|t| t.kind.name()).collect();
                    format!("raf[{}]", kinds.join(","))
                }
            },
        }
    }

    pub fn to_config(&self, at: &str) -> Result<ActivationConfig, CliError> {
        match self.mode {
            ActivationMode::Partition => {
                if self.set.is_empty() {
                    return Err(CliError::invalid(format!("{at}.set"), "partition needs at least one kind"));
                }
                let scalings = match &self.scalings {
                    Some(s) if s.len() != self.set.len() => {
                        return Err(CliError::invalid(
                            format!("{at}.scalings"),
                            format!("expected {} entries, got {}", self.set.len(), s.len()),
                        ))
                    }
                    Some(s) if s.iter().any(|v| !v.is_finite()) => {
                        return Err(CliError::invalid(format!("{at}.scalings"), "scalings must be finite"))
                    }
                    Some(s) => s.clone(),
                    None => self.set.iter().map(|k| k.default_scaling()).collect(),
                };
                Ok(ActivationConfig::Partition {
                    set: self.set.clone(),
                    scalings,
                    sine_frequencies: self.sine_frequencies,
                })
            }
            ActivationMode::Raf => {
                let terms = match (self.preset, self.terms.is_empty()) {
                    (Some(p), true) => p.terms(),
                    (None, false) => self.terms.clone(),
                    (Some(_), false) => {
                        return Err(CliError::invalid(format!("{at}.terms"), "give either a preset or terms, not both"))
                    }
                    (None, true) => {
                        return Err(CliError::invalid(format!("{at}.preset"), "RAF mode needs a preset or terms"))
                    }
                };
                for (i, t) in terms.iter().enumerate() {
                    t.alpha
                        .validate()
                        .map_err(|e| CliError::invalid(format!("{at}.terms[{i}].alpha"), e.to_string()))?;
                    t.beta.validate().map_err(|e| CliError::invalid(format!("{at}.terms[{i}].beta"), e.to_string()))?;
                }
                Ok(ActivationConfig::Raf { terms, train_alpha: self.train_alpha, train_beta: self.train_beta })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NtkConfig {
    pub samples: usize,
    /// Activation families to compare; empty means the top-level activation.
    pub families: Vec<ActivationBlock>,
}

impl Default for NtkConfig {
    fn default() -> Self {
        NtkConfig { samples: 100, families: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReproduceConfig {
    /// Random test points per polynomial or atom target.
    pub points: usize,
    pub targets: Vec<TargetConfig>,
}

impl Default for ReproduceConfig {
    fn default() -> Self {
        ReproduceConfig { points: 1000, targets: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetConfig {
    Monomial(MonomialTarget),
    Polynomial(PolynomialTarget),
    Chebyshev(ChebyshevTarget),
    Atom(AtomTarget),
}

/// `width` is the construction's `N`, `depth` its `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialTarget {
    pub exponents: Vec<u32>,
    pub width: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialTerm {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialTarget {
    pub name: String,
    pub terms: Vec<PolynomialTerm>,
    pub width: usize,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyticFunction {
    Exp,
    Sin,
    Cos,
    Cosh,
}

impl AnalyticFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            AnalyticFunction::Exp => x.exp(),
            AnalyticFunction::Sin => x.sin(),
            AnalyticFunction::Cos => x.cos(),
            AnalyticFunction::Cosh => x.cosh(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AnalyticFunction::Exp => "exp",
            AnalyticFunction::Sin => "sin",
            AnalyticFunction::Cos => "cos",
            AnalyticFunction::Cosh => "cosh",
        }
    }
}

/// Bernstein ellipse parameter `s` and the bound of `|f|` inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseConfig {
    pub s: f64,
    pub bound: f64,
}

fn one() -> f64 {
    1.0
}

fn default_grid() -> usize {
    2001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevTarget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub function: AnalyticFunction,
    pub degree: usize,
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ellipse: Option<EllipseConfig>,
    pub width: usize,
    pub depth: usize,
    /// Points of the dense uniform grid the error is measured on.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomTarget {
    pub kind: AtomKind,
    #[serde(default)]
    pub params: AtomParams,
}

/// A PGM image or CSV series on disk, or the built-in synthetic image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<SignalFormat>,
    /// Side length of the synthetic band-mixed image.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<usize>,
}

/// Reads and validates a configuration file. Relative signal paths are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    let mut cfg = parse_config_str(&text)?;
    if let Some(p) = cfg.signal.as_mut().and_then(|s| s.path.as_mut()) {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let mut record = |p: serde_ignored::Path<'_>| unknown.push(p.to_string());
    let tracked = serde_ignored::Deserializer::new(&mut de, &mut record);
    let parsed: Result<ExperimentConfig, _> = serde_path_to_error::deserialize(tracked);
    let mut cfg = parsed.map_err(|e| {
        let path = e.path().to_string();
        CliError::invalid(if path == "?" { ".".into() } else { path }, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| CliError::invalid(".", e.to_string()))?;
    if !unknown.is_empty() {
        return Err(CliError::UnknownKeys(unknown));
    }
    cfg.normalize()?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Folds `seed` into `seeds`, defaulting to seed 0.
    fn normalize(&mut self) -> Result<(), CliError> {
        match (self.seed.take(), self.seeds.take()) {
            (Some(_), Some(_)) => return Err(CliError::invalid("seeds", "give either seed or seeds, not both")),
            (Some(s), None) => self.seeds = Some(vec![s]),
            (None, Some(v)) if v.is_empty() => return Err(CliError::invalid("seeds", "must not be empty")),
            (None, Some(v)) => self.seeds = Some(v),
            (None, None) => self.seeds = Some(vec![0]),
        }
        Ok(())
    }

    pub fn seeds(&self) -> &[u64] {
        self.seeds.as_deref().unwrap_or(&[0])
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.seeds = Some(vec![seed]);
    }

    fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|(k, m)| CliError::invalid(format!("train.{k}"), m))?;
        let arch = &self.architecture;
        match arch.kind {
            ArchKind::Resnet if arch.width == 0 => {
                return Err(CliError::invalid("architecture.width", "must be positive"))
            }
            ArchKind::Resnet if arch.blocks == 0 => {
                return Err(CliError::invalid("architecture.blocks", "must be positive"))
            }
            ArchKind::Fnn if arch.widths.is_empty() || arch.widths.contains(&0) => {
                return Err(CliError::invalid("architecture.widths", "needs at least one positive width"))
            }
            _ => {}
        }
        self.activation.to_config("activation")?;
        for (i, f) in self.ntk.families.iter().enumerate() {
            f.to_config(&format!("ntk.families[{i}]"))?;
        }
        if self.ntk.samples == 0 {
            return Err(CliError::invalid("ntk.samples", "must be at least 1"));
        }
        if self.reproduce.points == 0 {
            return Err(CliError::invalid("reproduce.points", "must be at least 1"));
        }
        if let Some(name) = &self.problem {
            catalog(name).map_err(|e| CliError::invalid("problem", e.to_string()))?;
        }
        if let Some(sig) = &self.signal {
            match (&sig.path, sig.synthetic) {
                (Some(_), Some(_)) => {
                    return Err(CliError::invalid("signal", "give either path or synthetic, not both"))
                }
                (None, None) => return Err(CliError::invalid("signal", "needs a path or a synthetic size")),
                (None, Some(n)) if n < 2 => {
                    return Err(CliError::invalid("signal.synthetic", "size must be at least 2"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Checks what `command` needs beyond the generic validation.
    pub fn check_for(&self, command: Command) -> Result<(), CliError> {
        if let Some(c) = self.subcommand {
            if c != command {
                return Err(CliError::invalid(
                    "subcommand",
                    format!("config is for `{}` but `{}` was requested", c.name(), command.name()),
                ));
            }
        }
        match command {
            Command::Train | Command::Ntk if self.problem.is_none() => Err(CliError::invalid("problem", "required")),
            Command::FitSignal if self.signal.is_none() => Err(CliError::invalid("signal", "required")),
            Command::Reproduce if self.reproduce.targets.is_empty() => {
                Err(CliError::invalid("reproduce.targets", "needs at least one target"))
            }
            _ => Ok(()),
        }
    }

    pub fn init_scheme(&self, command: Command) -> InitScheme {
        self.init.unwrap_or(match command {
            Command::FitSignal => InitScheme::Siren { omega: 30.0 },
            _ => InitScheme::InverseSqrtFanIn,
        })
    }

    pub fn network_spec(
        &self,
        input_dim: usize,
        activation: &ActivationBlock,
        at: &str,
    ) -> Result<NetworkSpec, CliError> {
        let act = activation.to_config(at)?;
        let arch = &self.architecture;
        Ok(match arch.kind {
            ArchKind::Resnet => NetworkSpec::Resnet(build_resnet(input_dim, arch.width, arch.blocks, &act)?),
            ArchKind::Fnn => NetworkSpec::Fnn(build_fnn(input_dim, &arch.widths, &act)?),
        })
    }
}
