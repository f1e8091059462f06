//! The `report.json` written by every subcommand.

use raf_lab_core::ntk::ConditioningSummary;
use serde::Serialize;

use crate::config::{ActivationBlock, ExperimentConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbortInfo {
    pub iteration: usize,
    pub error: String,
}

/// One training run. Error figures are relative L2 on the held-out set
/// (the signal itself for `fit-signal`) and match the run's curve file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub curve: String,
    pub iterations: usize,
    pub initial_rel_l2: f64,
    pub final_rel_l2: Option<f64>,
    pub best_rel_l2: Option<f64>,
    pub moving_average: Option<f64>,
    pub best_moving_average: Option<f64>,
    pub final_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perfect_fit: Option<bool>,
    pub abort: Option<AbortInfo>,
}

/// Medians over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub final_rel_l2: Option<f64>,
    pub best_rel_l2: Option<f64>,
    pub best_moving_average: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub family: String,
    pub activation: ActivationBlock,
    pub conditioning: ConditioningSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateEntry {
    pub target: String,
    pub file: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub subcommand: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<SeedReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ntk: Vec<FamilyReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<CertificateEntry>,
    /// Only recorded with `train.record_time`, so reruns stay byte-identical.
    pub wall_time_ms: Option<f64>,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn numeric_abort(&self) -> Option<&AbortInfo> {
        self.runs.iter().find_map(|r| r.abort.as_ref())
    }
}
