//! The three end-to-end experiments (monolithic accelerator, per-layer
//! primitives over DMA, per-layer primitives over the Sidebar) and their
//! comparison reports.

mod engine;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{ScenarioContext, SimRun};
pub use report::{
    compare, compare_with, run_flexible_dma, run_monolithic, run_scenario, run_sidebar, ComparisonReport,
    EnergyReport, Ratios, SimReport, CSV_HEADER,
};

use crate::costmodel::ConfigError;
use crate::protocol::ProtocolError;
use crate::simcore::{SimError, TimelineViolation};
use crate::workload::{ActivationKind, WorkloadError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Monolithic,
    FlexibleDma,
    Sidebar,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Monolithic, Scenario::FlexibleDma, Scenario::Sidebar];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Monolithic => "monolithic",
            Scenario::FlexibleDma => "flexible_dma",
            Scenario::Sidebar => "sidebar",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "monolithic" | "mono" => Ok(Scenario::Monolithic),
            "flexible_dma" | "flexible" | "flexdma" | "dma" => Ok(Scenario::FlexibleDma),
            "sidebar" => Ok(Scenario::Sidebar),
            other => Err(WorkloadError::Usage(format!(
                "unknown scenario `{other}` (expected monolithic, flexible_dma or sidebar)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("protocol violation: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("simulation failure: {0}")]
    Sim(#[from] SimError),
    #[error("timeline violation: {0}")]
    Timeline(#[from] TimelineViolation),
    #[error("host service mismatch: {0}")]
    HostDecode(String),
    #[error("functional mismatch for {activation}: {scenario} output differs from monolithic/reference at index {index}")]
    FunctionalMismatch {
        activation: ActivationKind,
        scenario: Scenario,
        index: usize,
    },
}

impl ScenarioError {
    /// True for failures of the simulated system itself, as opposed to a bad
    /// request or config.
    pub fn is_correctness_failure(&self) -> bool {
        match self {
            ScenarioError::Config(_) => false,
            ScenarioError::Workload(e) => !matches!(
                e,
                WorkloadError::Usage(_)
                    | WorkloadError::UnknownActivation(_)
                    | WorkloadError::NoMonolithicSpec(_)
                    | WorkloadError::Config(_)
                    | WorkloadError::EluAlpha(_)
            ),
            _ => true,
        }
    }
}
