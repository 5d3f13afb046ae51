use serde::Serialize;

use super::{Action, Category, Device, Interval, SimError, SimEvent};
use crate::costmodel::CostQuote;

/// Energy (pJ) per category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyTotals {
    pub dram_bus: f64,
    pub sidebar: f64,
    pub accelerator: f64,
}

/// Cycles charged per category; their sum is the final clock of a
/// sequential timeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CycleTotals {
    pub dram_bus: u64,
    pub sidebar: u64,
    pub accelerator: u64,
    pub host: u64,
    pub poll_wait: u64,
}

impl CycleTotals {
    pub fn total(&self) -> u64 {
        self.dram_bus + self.sidebar + self.accelerator + self.host + self.poll_wait
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Accumulators {
    pub bus_bytes: u64,
    pub sidebar_bytes: u64,
    pub energy: EnergyTotals,
    pub cycles: CycleTotals,
}

impl Accumulators {
    pub fn add(&mut self, category: Category, quote: &CostQuote) {
        self.bus_bytes += quote.bus_bytes;
        self.sidebar_bytes += quote.sidebar_bytes;
        match category {
            Category::DramBus => {
                self.energy.dram_bus += quote.energy_pj;
                self.cycles.dram_bus += quote.cycles;
            }
            Category::Sidebar => {
                self.energy.sidebar += quote.energy_pj;
                self.cycles.sidebar += quote.cycles;
            }
            Category::Accelerator => {
                self.energy.accelerator += quote.energy_pj;
                self.cycles.accelerator += quote.cycles;
            }
            Category::Host => self.cycles.host += quote.cycles,
            Category::PollWait => self.cycles.poll_wait += quote.cycles,
            Category::Marker => {}
        }
    }

    /// Re-derives the totals from a trace.
    pub fn fold(trace: &[SimEvent]) -> Self {
        let mut acc = Accumulators::default();
        for e in trace {
            acc.add(e.action.category(), &e.cost);
        }
        acc
    }

    pub fn data_movement_pj(&self) -> f64 {
        self.energy.dram_bus + self.energy.sidebar
    }
}

/// Cycle at which a host polling every `interval` cycles (phase 0) sees a
/// flag raised at `raised_at`.
pub fn poll_observe_cycle(raised_at: u64, interval: u64) -> u64 {
    if interval == 0 {
        return raised_at;
    }
    raised_at.div_ceil(interval) * interval
}

pub fn poll_delay(raised_at: u64, interval: u64) -> u64 {
    poll_observe_cycle(raised_at, interval) - raised_at
}

/// Clock, trace and running totals of one simulation run.
#[derive(Debug, Clone, Default)]
pub struct SimState {
    clock: u64,
    trace: Vec<SimEvent>,
    acc: Accumulators,
    header: Vec<String>,
}

impl SimState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Header lines are part of the serialized trace and its digest.
    pub fn with_header(header: Vec<String>) -> Self {
        Self {
            header,
            ..Self::default()
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn trace(&self) -> &[SimEvent] {
        &self.trace
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn accumulators(&self) -> &Accumulators {
        &self.acc
    }

    fn push(&mut self, mut event: SimEvent) {
        if event.detail.contains(['\t', '\n', '\r']) {
            event.detail = event.detail.replace(['\t', '\n', '\r'], " ");
        }
        self.acc.add(event.action.category(), &event.cost);
        self.trace.push(event);
    }

    fn step(&mut self, cycles: u64) -> Result<u64, SimError> {
        self.clock = self.clock.checked_add(cycles).ok_or(SimError::ClockOverflow {
            clock: self.clock,
            cycles,
        })?;
        Ok(self.clock)
    }

    /// Runs one timed activity: Start now, End after `quote.cycles`.
    /// Returns the (start, end) cycles.
    pub fn advance(
        &mut self,
        quote: CostQuote,
        interval: Interval,
        device: Device,
        payload_bytes: u64,
        detail: impl Into<String>,
    ) -> Result<(u64, u64), SimError> {
        if !quote.is_valid() {
            return Err(SimError::InvalidQuote(format!("{quote:?}")));
        }
        let detail = detail.into();
        let (start_action, end_action) = interval.actions();
        let start = self.clock;
        let end = self.step(quote.cycles)?;
        self.push(SimEvent {
            at_cycle: start,
            device,
            action: start_action,
            payload_bytes,
            detail: detail.clone(),
            cost: CostQuote::ZERO,
        });
        self.push(SimEvent {
            at_cycle: end,
            device,
            action: end_action,
            payload_bytes,
            detail,
            cost: quote,
        });
        self.debug_check();
        Ok((start, end))
    }

    /// A zero-duration marker at the current clock.
    pub fn mark(&mut self, device: Device, action: Action, payload_bytes: u64, detail: impl Into<String>) {
        self.push(SimEvent {
            at_cycle: self.clock,
            device,
            action,
            payload_bytes,
            detail: detail.into(),
            cost: CostQuote::ZERO,
        });
    }

    /// Spins the host until its next poll sees the flag raised now. The wait
    /// is recorded on the `FlagObserve` event.
    pub fn wait_for_poll(&mut self, interval: u64, detail: impl Into<String>) -> Result<u64, SimError> {
        let wait = poll_delay(self.clock, interval);
        let at = self.step(wait)?;
        self.push(SimEvent {
            at_cycle: at,
            device: Device::Host,
            action: Action::FlagObserve,
            payload_bytes: 0,
            detail: detail.into(),
            cost: CostQuote::cycles(wait),
        });
        self.debug_check();
        Ok(at)
    }

    fn debug_check(&self) {
        #[cfg(debug_assertions)]
        {
            let folded = Accumulators::fold(&self.trace);
            debug_assert_eq!(folded.bus_bytes, self.acc.bus_bytes);
            debug_assert_eq!(folded.sidebar_bytes, self.acc.sidebar_bytes);
            debug_assert_eq!(folded.cycles, self.acc.cycles);
            debug_assert_eq!(self.acc.cycles.total(), self.clock);
        }
    }
}
