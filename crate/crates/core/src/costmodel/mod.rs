//! Cycle, energy and area constants plus the closed-form cost of every
//! modeled action: DMA transfers, Sidebar transfers, accelerator kernels and
//! host-side activation functions.

mod accel;
mod config;
mod params;
mod quote;

use thiserror::Error;

pub use accel::{primitives, relu_mono, softplus_mono, AcceleratorOverride, AcceleratorSpec, AcceleratorTable};
pub use config::{SimConfig, SHIPPED_CONFIG};
pub use params::TransferParams;
pub use quote::CostQuote;

use crate::workload::ActivationKind;

/// Bytes per tensor element on every modeled link (fp32), independent of
/// the f64 arithmetic used for the functional result.
pub const WIRE_BYTES_PER_ELEMENT: u64 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid `{field}`: requires {constraint}")]
    Invalid { field: String, constraint: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("cannot read config `{path}`: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    pub(crate) fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

/// Host-initiated DMA of `bytes`: program the engine, flush and invalidate
/// every covered cache line, then stream over the bus.
pub fn dma_cost(bytes: u64, params: &TransferParams) -> CostQuote {
    let lines = bytes.div_ceil(params.cache_line_bytes);
    let maintenance = params.flush_cycles_per_line + params.invalidate_cycles_per_line;
    CostQuote {
        cycles: params.dma_setup_cycles
            + lines * maintenance
            + bytes.div_ceil(params.bus_bytes_per_cycle),
        energy_pj: params.dma_setup_energy_pj + bytes as f64 * params.dram_energy_pj_per_byte,
        bus_bytes: bytes,
        sidebar_bytes: 0,
    }
}

/// Host sbLD/sbST burst of `bytes`; no cache maintenance, no bus traffic.
pub fn sidebar_cost(bytes: u64, params: &TransferParams) -> CostQuote {
    CostQuote {
        cycles: params.sidebar_latency_cycles + bytes.div_ceil(params.sidebar_bytes_per_cycle),
        energy_pj: bytes as f64 * params.sidebar_energy_pj_per_byte,
        bus_bytes: 0,
        sidebar_bytes: bytes,
    }
}

/// Host evaluation of an activation over `n` elements. CPU energy is outside
/// the data-movement model, so the quote carries cycles only.
pub fn host_activation_cost(
    kind: ActivationKind,
    n: u64,
    params: &TransferParams,
) -> Result<CostQuote, ConfigError> {
    let per_element = params.per_element_cycles(kind).ok_or_else(|| {
        ConfigError::invalid(
            format!("transfer.host_activation_cycles_per_element.{kind}"),
            "a per-element cost for every activation used",
        )
    })?;
    let body = (n as f64 * per_element).ceil() as u64;
    Ok(CostQuote::cycles(params.host_call_overhead_cycles + body))
}

/// One kernel invocation. Accelerator energy (cycle·mW) converts to pJ by
/// `1e9 / clock_hz`, which is the identity at 1 GHz.
pub fn accelerator_cost(spec: &AcceleratorSpec, params: &TransferParams) -> CostQuote {
    let energy_pj = if params.clock_hz == 1_000_000_000 {
        spec.energy as f64
    } else {
        spec.energy as f64 * 1e9 / params.clock_hz as f64
    };
    CostQuote {
        cycles: spec.cycles,
        energy_pj,
        bus_bytes: 0,
        sidebar_bytes: 0,
    }
}

/// Energy-delay product in joule-seconds.
pub fn edp(latency_cycles: u64, energy_pj: f64, clock_hz: u64) -> f64 {
    let seconds = latency_cycles as f64 / clock_hz as f64;
    seconds * (energy_pj * 1e-12)
}
