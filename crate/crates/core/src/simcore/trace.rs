use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{interval_of, Action, Device, Interval, SimEvent, SimState};
use crate::costmodel::CostQuote;

/// Column header of the exported trace.
pub const TRACE_COLUMNS: &str = "cycle\tdevice\taction\tbytes\tdetail\tcost_cycles\tcost_energy_pj\tcost_bus_bytes\tcost_sidebar_bytes";

/// Digest of a trace with no header and no events (SHA-256 of the empty string).
pub const EMPTY_TRACE_DIGEST: u64 = 0xe3b0_c442_98fc_1c14;

/// Serializes a trace: `# ` header lines, the column line, then one
/// tab-separated event per line. Energies use Rust's shortest round-trip
/// float formatting, so the text is identical on every platform.
pub fn export_trace(header: &[String], events: &[SimEvent]) -> String {
    let mut out = String::new();
    for line in header {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    if header.is_empty() && events.is_empty() {
        return out;
    }
    out.push_str(TRACE_COLUMNS);
    out.push('\n');
    for e in events {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            e.at_cycle,
            e.device,
            e.action,
            e.payload_bytes,
            e.detail,
            e.cost.cycles,
            e.cost.energy_pj,
            e.cost.bus_bytes,
            e.cost.sidebar_bytes
        ));
    }
    out
}

pub fn export_state(state: &SimState) -> String {
    export_trace(state.header(), state.trace())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

/// Inverse of [`export_trace`].
pub fn parse_trace(text: &str) -> Result<(Vec<String>, Vec<SimEvent>), TraceParseError> {
    let mut header = Vec::new();
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| TraceParseError { line: i + 1, message };
        if let Some(h) = line.strip_prefix("# ") {
            header.push(h.to_string());
            continue;
        }
        if line == TRACE_COLUMNS || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 9 {
            return Err(err(format!("expected 9 columns, found {}", cols.len())));
        }
        let int = |s: &str, what: &str| s.parse::<u64>().map_err(|e| err(format!("{what}: {e}")));
        events.push(SimEvent {
            at_cycle: int(cols[0], "cycle")?,
            device: cols[1].parse().map_err(err)?,
            action: cols[2].parse().map_err(err)?,
            payload_bytes: int(cols[3], "bytes")?,
            detail: cols[4].to_string(),
            cost: CostQuote {
                cycles: int(cols[5], "cost_cycles")?,
                energy_pj: cols[6]
                    .parse()
                    .map_err(|e| err(format!("cost_energy_pj: {e}")))?,
                bus_bytes: int(cols[7], "cost_bus_bytes")?,
                sidebar_bytes: int(cols[8], "cost_sidebar_bytes")?,
            },
        });
    }
    Ok((header, events))
}

/// First eight bytes (big-endian) of the SHA-256 of `text`.
pub fn digest_text(text: &str) -> u64 {
    let hash = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(hash[..8].try_into().expect("sha256 is 32 bytes"))
}

/// Digest of the serialized trace, header included.
pub fn trace_hash(state: &SimState) -> u64 {
    digest_text(&export_state(state))
}

/// A matched Start/End pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Span {
    pub device: Device,
    pub interval: Interval,
    pub start: u64,
    pub end: u64,
    pub detail: String,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimelineViolation {
    #[error("event {index} at cycle {at} precedes cycle {previous}")]
    NonMonotonic { index: usize, at: u64, previous: u64 },
    #[error("event {index} ({action}) has no open Start")]
    UnmatchedEnd { index: usize, action: Action },
    #[error("event {index} ({action}) opens an interval already open on {device}")]
    Reopened { index: usize, action: Action, device: Device },
    #[error("event {index} ({action}) is never closed")]
    UnclosedStart { index: usize, action: Action },
    #[error("{first:?} on {first_device} [{first_start}, {first_end}) overlaps {second:?} on {second_device}")]
    Overlap {
        first: Interval,
        first_device: Device,
        first_start: u64,
        first_end: u64,
        second: Interval,
        second_device: Device,
    },
}

/// Pairs every Start with its End, checking monotone timestamps.
pub fn spans(events: &[SimEvent]) -> Result<Vec<Span>, TimelineViolation> {
    let mut open: Vec<(usize, Device, Interval)> = Vec::new();
    let mut out = Vec::new();
    let mut previous = 0;
    for (index, e) in events.iter().enumerate() {
        if e.at_cycle < previous {
            return Err(TimelineViolation::NonMonotonic {
                index,
                at: e.at_cycle,
                previous,
            });
        }
        previous = e.at_cycle;
        let Some((interval, is_start)) = interval_of(e.action) else {
            continue;
        };
        let slot = open.iter().position(|&(_, d, i)| d == e.device && i == interval);
        if is_start {
            if slot.is_some() {
                return Err(TimelineViolation::Reopened {
                    index,
                    action: e.action,
                    device: e.device,
                });
            }
            open.push((index, e.device, interval));
        } else {
            let Some(slot) = slot else {
                return Err(TimelineViolation::UnmatchedEnd { index, action: e.action });
            };
            let (start_index, device, interval) = open.remove(slot);
            out.push(Span {
                device,
                interval,
                start: events[start_index].at_cycle,
                end: e.at_cycle,
                detail: events[start_index].detail.clone(),
            });
        }
    }
    if let Some(&(index, _, _)) = open.first() {
        return Err(TimelineViolation::UnclosedStart {
            index,
            action: events[index].action,
        });
    }
    Ok(out)
}

/// No two kernels of different accelerators overlap, and no kernel overlaps
/// host computation.
pub fn check_single_timeline(events: &[SimEvent]) -> Result<Vec<Span>, TimelineViolation> {
    let spans = spans(events)?;
    let kernels: Vec<&Span> = spans.iter().filter(|s| s.interval == Interval::Kernel).collect();
    let host: Vec<&Span> = spans.iter().filter(|s| s.interval == Interval::HostCompute).collect();
    let overlap = |a: &Span, b: &Span| TimelineViolation::Overlap {
        first: a.interval,
        first_device: a.device,
        first_start: a.start,
        first_end: a.end,
        second: b.interval,
        second_device: b.device,
    };
    for (i, a) in kernels.iter().enumerate() {
        for b in &kernels[i + 1..] {
            if a.device != b.device && a.overlaps(b) {
                return Err(overlap(a, b));
            }
        }
        if let Some(h) = host.iter().find(|h| a.overlaps(h)) {
            return Err(overlap(a, h));
        }
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(at: u64, device: Device, action: Action) -> SimEvent {
        SimEvent {
            at_cycle: at,
            device,
            action,
            payload_bytes: 0,
            detail: String::new(),
            cost: CostQuote::ZERO,
        }
    }

    #[test]
    fn empty_digest_constant() {
        assert_eq!(trace_hash(&SimState::new()), EMPTY_TRACE_DIGEST);
    }

    #[test]
    fn round_trip() {
        let mut s = SimState::with_header(vec!["scenario=test".into()]);
        let q = CostQuote {
            cycles: 12,
            energy_pj: 0.1 + 0.2,
            bus_bytes: 3,
            sidebar_bytes: 0,
        };
        s.advance(q, Interval::DmaLoad, Device::DmaEngine, 3, "input").unwrap();
        s.mark(Device::Accel(4), Action::FlagRaise, 0, "relu");
        let text = export_state(&s);
        let (header, events) = parse_trace(&text).unwrap();
        assert_eq!(header, s.header());
        assert_eq!(events, s.trace());
        assert_eq!(export_trace(&header, &events), text);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_trace("# h\n1\thost\n").unwrap_err();
        assert_eq!(err.line, 2);
        let bad = format!("{TRACE_COLUMNS}\n1\tgpu\tKernelStart\t0\t\t0\t0\t0\t0\n");
        assert!(parse_trace(&bad).unwrap_err().message.contains("gpu"));
    }

    #[test]
    fn digest_depends_on_header() {
        let a = SimState::with_header(vec!["x=1".into()]);
        let b = SimState::with_header(vec!["x=2".into()]);
        assert_ne!(trace_hash(&a), trace_hash(&b));
    }

    #[test]
    fn overlapping_kernels_detected() {
        let events = vec![
            ev(0, Device::Accel(1), Action::KernelStart),
            ev(5, Device::Accel(2), Action::KernelStart),
            ev(10, Device::Accel(1), Action::KernelEnd),
            ev(12, Device::Accel(2), Action::KernelEnd),
        ];
        assert!(matches!(check_single_timeline(&events), Err(TimelineViolation::Overlap { .. })));
    }

    #[test]
    fn kernel_overlapping_host_compute_detected() {
        let events = vec![
            ev(0, Device::Accel(1), Action::KernelStart),
            ev(3, Device::Host, Action::HostComputeStart),
            ev(4, Device::Host, Action::HostComputeEnd),
            ev(10, Device::Accel(1), Action::KernelEnd),
        ];
        assert!(check_single_timeline(&events).is_err());
    }

    #[test]
    fn back_to_back_is_fine() {
        let events = vec![
            ev(0, Device::Accel(1), Action::KernelStart),
            ev(10, Device::Accel(1), Action::KernelEnd),
            ev(10, Device::Host, Action::HostComputeStart),
            ev(12, Device::Host, Action::HostComputeEnd),
            ev(12, Device::Accel(2), Action::KernelStart),
            ev(20, Device::Accel(2), Action::KernelEnd),
        ];
        assert_eq!(check_single_timeline(&events).unwrap().len(), 3);
    }

    #[test]
    fn structural_errors() {
        let unmatched = vec![ev(0, Device::Host, Action::HostComputeEnd)];
        assert!(matches!(spans(&unmatched), Err(TimelineViolation::UnmatchedEnd { .. })));
        let unclosed = vec![ev(0, Device::Host, Action::HostComputeStart)];
        assert!(matches!(spans(&unclosed), Err(TimelineViolation::UnclosedStart { .. })));
        let backwards = vec![ev(5, Device::Host, Action::FlagObserve), ev(4, Device::Host, Action::FlagObserve)];
        assert!(matches!(spans(&backwards), Err(TimelineViolation::NonMonotonic { .. })));
    }
}
