use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::costmodel::CostQuote;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Device {
    Host,
    Accel(u32),
    DmaEngine,
    Sidebar,
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Device::Host => f.write_str("host"),
            Device::Accel(id) => write!(f, "accel{id}"),
            Device::DmaEngine => f.write_str("dma"),
            Device::Sidebar => f.write_str("sidebar"),
        }
    }
}

impl FromStr for Device {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "host" => Ok(Device::Host),
            "dma" => Ok(Device::DmaEngine),
            "sidebar" => Ok(Device::Sidebar),
            _ => s
                .strip_prefix("accel")
                .and_then(|id| id.parse().ok())
                .map(Device::Accel)
                .ok_or_else(|| format!("unknown device `{s}`")),
        }
    }
}

macro_rules! actions {
    ($($name:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
        pub enum Action {
            $($name),*
        }

        impl Action {
            pub const ALL: &'static [Action] = &[$(Action::$name),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Action::$name => stringify!($name)),*
                }
            }
        }
    };
}

actions!(
    DmaLoadStart,
    DmaLoadEnd,
    DmaStoreStart,
    DmaStoreEnd,
    KernelStart,
    KernelEnd,
    SbWriteStart,
    SbWriteEnd,
    SbReadStart,
    SbReadEnd,
    FlagRaise,
    FlagObserve,
    HostComputeStart,
    HostComputeEnd,
    HostSetupStart,
    HostSetupEnd,
    OwnershipTransfer,
);

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

/// A timed activity recorded as a Start/End pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Interval {
    DmaLoad,
    DmaStore,
    Kernel,
    SbWrite,
    SbRead,
    HostCompute,
    HostSetup,
}

impl Interval {
    pub fn actions(self) -> (Action, Action) {
        match self {
            Interval::DmaLoad => (Action::DmaLoadStart, Action::DmaLoadEnd),
            Interval::DmaStore => (Action::DmaStoreStart, Action::DmaStoreEnd),
            Interval::Kernel => (Action::KernelStart, Action::KernelEnd),
            Interval::SbWrite => (Action::SbWriteStart, Action::SbWriteEnd),
            Interval::SbRead => (Action::SbReadStart, Action::SbReadEnd),
            Interval::HostCompute => (Action::HostComputeStart, Action::HostComputeEnd),
            Interval::HostSetup => (Action::HostSetupStart, Action::HostSetupEnd),
        }
    }

    pub fn category(self) -> Category {
        match self {
            Interval::DmaLoad | Interval::DmaStore => Category::DramBus,
            Interval::SbWrite | Interval::SbRead => Category::Sidebar,
            Interval::Kernel => Category::Accelerator,
            Interval::HostCompute | Interval::HostSetup => Category::Host,
        }
    }
}

/// (interval, is_start) for actions that bound an interval.
pub fn interval_of(action: Action) -> Option<(Interval, bool)> {
    use Interval::*;
    [DmaLoad, DmaStore, Kernel, SbWrite, SbRead, HostCompute, HostSetup]
        .into_iter()
        .find_map(|i| {
            let (s, e) = i.actions();
            if action == s {
                Some((i, true))
            } else if action == e {
                Some((i, false))
            } else {
                None
            }
        })
}

/// Accounting bucket for an event's cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Category {
    DramBus,
    Sidebar,
    Accelerator,
    Host,
    PollWait,
    Marker,
}

impl Action {
    pub fn category(self) -> Category {
        match (self, interval_of(self)) {
            (_, Some((interval, _))) => interval.category(),
            (Action::FlagObserve, None) => Category::PollWait,
            _ => Category::Marker,
        }
    }
}

/// One trace record. Costs ride on End events (and on `FlagObserve` for
/// the poll wait); Start and marker events carry a zero quote.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEvent {
    pub at_cycle: u64,
    pub device: Device,
    pub action: Action,
    pub payload_bytes: u64,
    pub detail: String,
    pub cost: CostQuote,
}
