use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AcceleratorOverride, AcceleratorTable, ConfigError, TransferParams};
use crate::protocol::SidebarLayout;

/// Text of the calibrated configuration shipped with the crate.
pub const SHIPPED_CONFIG: &str = include_str!("../../configs/default.cfg");

/// Everything a run reads from a config file.
///
/// Every `transfer` and `sidebar` key is mandatory. The `accelerators` table
/// is optional and adds to or replaces entries of the shipped table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub transfer: TransferParams,
    pub sidebar: SidebarLayout,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub accelerators: BTreeMap<String, AcceleratorOverride>,
}

impl SimConfig {
    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED_CONFIG).expect("shipped default.cfg is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.transfer.validate()?;
        self.sidebar.validate()?;
        self.accelerator_table().map(|_| ())
    }

    pub fn accelerator_table(&self) -> Result<AcceleratorTable, ConfigError> {
        AcceleratorTable::shipped().with_overrides(&self.accelerators)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::ActivationKind;

    #[test]
    fn shipped_config_parses() {
        let c = SimConfig::shipped();
        assert_eq!(c.transfer.clock_hz, 1_000_000_000);
        assert_eq!(c.transfer.host_activation_cycles_per_element.len(), 7);
    }

    #[test]
    fn missing_field_is_named() {
        let text = SHIPPED_CONFIG
            .lines()
            .filter(|l| !l.starts_with("bus_bytes_per_cycle"))
            .collect::<Vec<_>>()
            .join("\n");
        let err = SimConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("bus_bytes_per_cycle"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = SHIPPED_CONFIG.replacen("[transfer]", "[transfer]\nturbo = true", 1);
        let err = SimConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("turbo"), "{err}");
    }

    #[test]
    fn invariant_violation_rejected_at_load() {
        let mut c = SimConfig::shipped();
        c.transfer.sidebar_energy_pj_per_byte = c.transfer.dram_energy_pj_per_byte;
        let err = SimConfig::from_toml_str(&c.to_toml_string()).unwrap_err();
        assert!(err.to_string().contains("sidebar_energy_pj_per_byte < dram_energy_pj_per_byte"));
    }

    #[test]
    fn accelerator_overrides_round_trip() {
        let mut c = SimConfig::shipped();
        c.accelerators.insert(
            "elu_mono".into(),
            AcceleratorOverride {
                cycles: 150_000,
                energy: 900_000_000,
                area_um2: 4.9e8,
            },
        );
        let back = SimConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        let table = back.accelerator_table().unwrap();
        assert_eq!(table.monolithic(ActivationKind::Elu).unwrap().cycles, 150_000);
    }
}
