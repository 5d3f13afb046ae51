//! The Sidebar buffer: layout, sbLD/sbST, the ownership register, the host
//! function table and the data-before-flag ordering check.

mod buffer;
mod layout;
mod table;

use thiserror::Error;

pub use buffer::{
    Epoch, FlagPhase, InvocationRecord, InvokeArgs, OwnershipTransfer, Party, ServiceRequest, SidebarBuffer,
    WriteRecord,
};
pub use layout::{SidebarLayout, MIN_ARG_BLOCK_BYTES, SLOT_BYTES};
pub use table::{FunctionEntry, FunctionTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("sidebar access by {caller} while {owner} owns the buffer")]
    NotOwner { caller: Party, owner: Party },
    #[error("sidebar access [{offset}, {offset}+{len}) outside capacity {capacity}")]
    OutOfBounds { offset: u64, len: u64, capacity: u64 },
    #[error("unknown host function id {0}")]
    UnknownFunction(u64),
    #[error("data write at offset {offset} completes at cycle {write_cycle}, after the flag write at cycle {flag_cycle}")]
    FenceViolation { offset: u64, write_cycle: u64, flag_cycle: u64 },
    #[error("host service requested but the flag is not raised")]
    FlagNotRaised,
    #[error("invocation while a previous one is still outstanding")]
    FlagAlreadyRaised,
    #[error("intermediate of {needed} bytes exceeds the sidebar data region of {available} bytes")]
    CapacityExceeded { needed: u64, available: u64 },
    #[error("invalid sidebar layout: {0}")]
    Layout(String),
}
