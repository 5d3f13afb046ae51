use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::workload::ActivationKind;

/// Synthesized accelerator characteristics.
///
/// `energy` is in cycle-milliwatts. At the 1 GHz system clock one cycle·mW
/// equals one picojoule, so the value is used directly as pJ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceleratorSpec {
    pub name: String,
    pub cycles: u64,
    pub energy: u64,
    pub area_um2: f64,
}

impl AcceleratorSpec {
    pub fn new(name: impl Into<String>, cycles: u64, energy: u64, area_um2: f64) -> Self {
        Self {
            name: name.into(),
            cycles,
            energy,
            area_um2,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let field = |f: &str| format!("accelerators.{}.{f}", self.name);
        if self.cycles == 0 {
            return Err(ConfigError::invalid(field("cycles"), "cycles > 0"));
        }
        if self.energy == 0 {
            return Err(ConfigError::invalid(field("energy"), "energy > 0"));
        }
        if !(self.area_um2 > 0.0 && self.area_um2.is_finite()) {
            return Err(ConfigError::invalid(field("area_um2"), "area_um2 > 0"));
        }
        Ok(())
    }
}

pub fn relu_mono() -> AcceleratorSpec {
    AcceleratorSpec::new("relu_mono", 122_151, 724_294_354, 4.82445e8)
}

pub fn softplus_mono() -> AcceleratorSpec {
    AcceleratorSpec::new("softplus_mono", 147_967, 873_817_638, 4.82448e8)
}

/// The five activation-free primitives, S1 through S5.
pub fn primitives() -> [AcceleratorSpec; 5] {
    [
        AcceleratorSpec::new("s1", 23_124, 138_988_189, 4.61686e8),
        AcceleratorSpec::new("s2", 22_541, 86_039_447, 2.90202e8),
        AcceleratorSpec::new("s3", 66_060, 51_164_791, 6.10141e7),
        AcceleratorSpec::new("s4", 17_847, 3_560_833, 1.46956e7),
        AcceleratorSpec::new("s5", 2_546, 110_980, 2.60089e6),
    ]
}

/// Config-file form of a spec; the name comes from the table key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceleratorOverride {
    pub cycles: u64,
    pub energy: u64,
    pub area_um2: f64,
}

/// Accelerator specs by name.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceleratorTable {
    specs: BTreeMap<String, AcceleratorSpec>,
}

impl AcceleratorTable {
    /// The seven synthesized accelerators.
    pub fn shipped() -> Self {
        let specs = [relu_mono(), softplus_mono()]
            .into_iter()
            .chain(primitives())
            .map(|s| (s.name.clone(), s))
            .collect();
        Self { specs }
    }

    pub fn with_overrides(
        mut self,
        overrides: &BTreeMap<String, AcceleratorOverride>,
    ) -> Result<Self, ConfigError> {
        for (name, o) in overrides {
            let spec = AcceleratorSpec::new(name.clone(), o.cycles, o.energy, o.area_um2);
            spec.validate()?;
            self.specs.insert(name.clone(), spec);
        }
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&AcceleratorSpec> {
        self.specs.get(name)
    }

    /// Monolithic accelerator with `kind` built in, stored as `<kind>_mono`.
    pub fn monolithic(&self, kind: ActivationKind) -> Option<&AcceleratorSpec> {
        self.specs.get(&format!("{}_mono", kind.name()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &AcceleratorSpec> {
        self.specs.values()
    }
}

impl Default for AcceleratorTable {
    fn default() -> Self {
        Self::shipped()
    }
}
