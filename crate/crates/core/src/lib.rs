//! Reproducing activation functions, neural PDE solvers, NTK conditioning and
//! constructive reproduction networks.

pub mod activations;
pub mod autodiff;
pub mod error;
pub mod networks;
pub mod ntk;
pub mod problems;
pub mod reproduce;
pub mod training;

pub use activations::{BasicActivation, RafSpec};
pub use autodiff::{DerivOrder, Graph, Jet};
pub use error::{Error, Result};
pub use networks::{Ansatz, NetworkParams, NetworkSpec};
pub use problems::ProblemSpec;
pub use training::TrainConfig;
