//! Cycle-level model of a host CPU driving neural-network accelerators,
//! comparing a monolithic accelerator, per-layer primitives that exchange
//! intermediates over DMA, and the same primitives sharing a small
//! host-accelerator buffer (the Sidebar).

pub mod costmodel;
pub mod protocol;
pub mod scenarios;
pub mod simcore;
pub mod workload;
