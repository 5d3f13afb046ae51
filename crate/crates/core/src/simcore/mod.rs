//! Discrete-event engine: a virtual cycle clock, the event trace and its
//! running cost totals.

mod event;
mod state;
mod trace;

use thiserror::Error;

pub use event::{interval_of, Action, Category, Device, Interval, SimEvent};
pub use state::{poll_delay, poll_observe_cycle, Accumulators, CycleTotals, EnergyTotals, SimState};
pub use trace::{
    check_single_timeline, digest_text, export_state, export_trace, parse_trace, spans, trace_hash, Span,
    TimelineViolation, TraceParseError, EMPTY_TRACE_DIGEST, TRACE_COLUMNS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("clock overflow advancing {cycles} cycles from {clock}")]
    ClockOverflow { clock: u64, cycles: u64 },
    #[error("invalid cost quote {0}")]
    InvalidQuote(String),
}
