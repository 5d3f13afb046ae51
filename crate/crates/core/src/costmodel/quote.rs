use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Cost of one modeled action. Quotes compose by field-wise sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostQuote {
    pub cycles: u64,
    pub energy_pj: f64,
    pub bus_bytes: u64,
    pub sidebar_bytes: u64,
}

impl CostQuote {
    pub const ZERO: CostQuote = CostQuote {
        cycles: 0,
        energy_pj: 0.0,
        bus_bytes: 0,
        sidebar_bytes: 0,
    };

    pub fn cycles(cycles: u64) -> Self {
        Self {
            cycles,
            ..Self::ZERO
        }
    }

    pub fn is_valid(&self) -> bool {
        self.energy_pj >= 0.0 && self.energy_pj.is_finite()
    }
}

impl Add for CostQuote {
    type Output = CostQuote;

    fn add(self, rhs: CostQuote) -> CostQuote {
        CostQuote {
            cycles: self.cycles + rhs.cycles,
            energy_pj: self.energy_pj + rhs.energy_pj,
            bus_bytes: self.bus_bytes + rhs.bus_bytes,
            sidebar_bytes: self.sidebar_bytes + rhs.sidebar_bytes,
        }
    }
}

impl AddAssign for CostQuote {
    fn add_assign(&mut self, rhs: CostQuote) {
        *self = *self + rhs;
    }
}

impl Sum for CostQuote {
    fn sum<I: Iterator<Item = CostQuote>>(iter: I) -> Self {
        iter.fold(CostQuote::ZERO, Add::add)
    }
}
