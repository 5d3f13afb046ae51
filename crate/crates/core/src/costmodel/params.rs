use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::workload::ActivationKind;

/// Every cycle and energy coefficient of the transfer and host models.
///
/// Integer fields are cycles or bytes; energies are picojoules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferParams {
    pub clock_hz: u64,
    pub cache_line_bytes: u64,
    /// Fixed cycles to program one DMA transfer.
    pub dma_setup_cycles: u64,
    /// Fixed DRAM-side energy of one DMA transfer (cache write-back and
    /// descriptor traffic). May be zero.
    pub dma_setup_energy_pj: f64,
    pub flush_cycles_per_line: u64,
    pub invalidate_cycles_per_line: u64,
    pub bus_bytes_per_cycle: u64,
    pub dram_energy_pj_per_byte: f64,
    pub sidebar_latency_cycles: u64,
    pub sidebar_bytes_per_cycle: u64,
    pub sidebar_energy_pj_per_byte: f64,
    pub host_poll_interval_cycles: u64,
    pub host_call_overhead_cycles: u64,
    /// Host work before the first transfer (allocation, array mapping),
    /// identical in every scenario. May be zero.
    pub host_setup_cycles: u64,
    pub host_activation_cycles_per_element: BTreeMap<ActivationKind, f64>,
}

impl Default for TransferParams {
    /// Uncalibrated starting point; the shipped `default.cfg` is the
    /// calibrated configuration.
    fn default() -> Self {
        let per_element = [
            (ActivationKind::Relu, 1.0),
            (ActivationKind::LeakyRelu, 1.5),
            (ActivationKind::Heaviside, 1.0),
            (ActivationKind::Sigmoid, 12.0),
            (ActivationKind::Tanh, 12.0),
            (ActivationKind::Elu, 14.0),
            (ActivationKind::Softplus, 18.0),
        ]
        .into_iter()
        .collect();
        Self {
            clock_hz: 1_000_000_000,
            cache_line_bytes: 64,
            dma_setup_cycles: 1000,
            dma_setup_energy_pj: 0.0,
            flush_cycles_per_line: 32,
            invalidate_cycles_per_line: 8,
            bus_bytes_per_cycle: 16,
            dram_energy_pj_per_byte: 20.0,
            sidebar_latency_cycles: 4,
            sidebar_bytes_per_cycle: 16,
            sidebar_energy_pj_per_byte: 1.0,
            host_poll_interval_cycles: 50,
            host_call_overhead_cycles: 200,
            host_setup_cycles: 0,
            host_activation_cycles_per_element: per_element,
        }
    }
}

fn positive_int(field: &str, value: u64) -> Result<(), ConfigError> {
    if value == 0 {
        return Err(ConfigError::invalid(format!("transfer.{field}"), format!("{field} > 0")));
    }
    Ok(())
}

fn positive_real(field: &str, value: f64) -> Result<(), ConfigError> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(ConfigError::invalid(
            format!("transfer.{field}"),
            format!("{field} > 0 (got {value})"),
        ));
    }
    Ok(())
}

impl TransferParams {
    /// Rejects any coefficient set that breaks the model's premises: all
    /// coefficients positive, the Sidebar cheaper per byte than DRAM, no
    /// slower to reach than one flushed and invalidated line, and at least
    /// as wide as the system bus.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in [
            ("clock_hz", self.clock_hz),
            ("cache_line_bytes", self.cache_line_bytes),
            ("dma_setup_cycles", self.dma_setup_cycles),
            ("flush_cycles_per_line", self.flush_cycles_per_line),
            ("invalidate_cycles_per_line", self.invalidate_cycles_per_line),
            ("bus_bytes_per_cycle", self.bus_bytes_per_cycle),
            ("sidebar_latency_cycles", self.sidebar_latency_cycles),
            ("sidebar_bytes_per_cycle", self.sidebar_bytes_per_cycle),
            ("host_poll_interval_cycles", self.host_poll_interval_cycles),
            ("host_call_overhead_cycles", self.host_call_overhead_cycles),
        ] {
            positive_int(field, value)?;
        }
        positive_real("dram_energy_pj_per_byte", self.dram_energy_pj_per_byte)?;
        positive_real("sidebar_energy_pj_per_byte", self.sidebar_energy_pj_per_byte)?;
        if !(self.dma_setup_energy_pj >= 0.0 && self.dma_setup_energy_pj.is_finite()) {
            return Err(ConfigError::invalid(
                "transfer.dma_setup_energy_pj",
                format!("dma_setup_energy_pj >= 0 (got {})", self.dma_setup_energy_pj),
            ));
        }
        for kind in ActivationKind::ALL {
            let field = format!("host_activation_cycles_per_element.{kind}");
            match self.host_activation_cycles_per_element.get(&kind) {
                Some(&v) => positive_real(&field, v)?,
                None => {
                    return Err(ConfigError::invalid(
                        format!("transfer.{field}"),
                        "every activation kind needs a per-element cost",
                    ))
                }
            }
        }
        if self.sidebar_energy_pj_per_byte >= self.dram_energy_pj_per_byte {
            return Err(ConfigError::invalid(
                "transfer.sidebar_energy_pj_per_byte",
                format!(
                    "sidebar_energy_pj_per_byte < dram_energy_pj_per_byte ({} >= {})",
                    self.sidebar_energy_pj_per_byte, self.dram_energy_pj_per_byte
                ),
            ));
        }
        let line_maintenance = self.flush_cycles_per_line + self.invalidate_cycles_per_line;
        if self.sidebar_latency_cycles > line_maintenance {
            return Err(ConfigError::invalid(
                "transfer.sidebar_latency_cycles",
                format!(
                    "sidebar_latency_cycles <= flush_cycles_per_line + invalidate_cycles_per_line ({} > {line_maintenance})",
                    self.sidebar_latency_cycles
                ),
            ));
        }
        if self.sidebar_bytes_per_cycle < self.bus_bytes_per_cycle {
            return Err(ConfigError::invalid(
                "transfer.sidebar_bytes_per_cycle",
                format!(
                    "sidebar_bytes_per_cycle >= bus_bytes_per_cycle ({} < {})",
                    self.sidebar_bytes_per_cycle, self.bus_bytes_per_cycle
                ),
            ));
        }
        Ok(())
    }

    pub fn per_element_cycles(&self, kind: ActivationKind) -> Option<f64> {
        self.host_activation_cycles_per_element.get(&kind).copied()
    }
}
