use std::fmt;

use serde::Serialize;

use super::{FunctionTable, ProtocolError, SidebarLayout};
use crate::workload::Activation;

/// A party that can hold the Sidebar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Party {
    Host,
    Accelerator(u32),
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Host => f.write_str("host"),
            Party::Accelerator(id) => write!(f, "accel{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WriteRecord {
    pub offset: u64,
    pub len: u64,
    pub completion_cycle: u64,
}

/// One closed ownership epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Epoch {
    pub index: usize,
    pub owner: Party,
    pub started_at: u64,
    pub ended_at: u64,
    pub writes: Vec<WriteRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OwnershipTransfer {
    pub from: Party,
    pub to: Party,
    pub at_cycle: u64,
}

/// Where the flag is in its raise/service/lower cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlagPhase {
    Low,
    Raised,
    Serviced,
}

/// Arguments an accelerator publishes with an invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvokeArgs {
    pub element_count: u64,
    pub data_offset: u64,
    pub data_len: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvocationRecord {
    pub accel_id: u32,
    pub function_id: u64,
    pub activation: Activation,
    pub element_count: u64,
    pub flag_cycle: u64,
    pub transfer: OwnershipTransfer,
}

/// What the host decodes from a raised flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceRequest {
    pub function_id: u64,
    pub activation: Activation,
    pub args: InvokeArgs,
}

/// The shared buffer between the host and the accelerator pool.
///
/// Only the current owner may touch memory; ownership moves only by the
/// owner writing the release register. The buffer is zeroed at reset.
#[derive(Debug, Clone)]
pub struct SidebarBuffer {
    layout: SidebarLayout,
    memory: Vec<u8>,
    owner: Party,
    peer: u32,
    epoch_start: u64,
    write_log: Vec<WriteRecord>,
    history: Vec<Epoch>,
    phase: FlagPhase,
    invocations: u64,
    services: u64,
    completions: u64,
}

impl SidebarBuffer {
    /// A zeroed buffer owned by accelerator `accel_id`.
    pub fn new(layout: SidebarLayout, accel_id: u32) -> Result<Self, ProtocolError> {
        layout.validate().map_err(|e| ProtocolError::Layout(e.to_string()))?;
        Ok(Self {
            layout,
            memory: vec![0; layout.capacity_bytes as usize],
            owner: Party::Accelerator(accel_id),
            peer: accel_id,
            epoch_start: 0,
            write_log: Vec::new(),
            history: Vec::new(),
            phase: FlagPhase::Low,
            invocations: 0,
            services: 0,
            completions: 0,
        })
    }

    pub fn layout(&self) -> &SidebarLayout {
        &self.layout
    }

    pub fn owner(&self) -> Party {
        self.owner
    }

    pub fn flag_phase(&self) -> FlagPhase {
        self.phase
    }

    pub fn write_log(&self) -> &[WriteRecord] {
        &self.write_log
    }

    pub fn history(&self) -> &[Epoch] {
        &self.history
    }

    /// (invocations raised, requests serviced, flags lowered)
    pub fn flag_counts(&self) -> (u64, u64, u64) {
        (self.invocations, self.services, self.completions)
    }

    fn check_owner(&self, caller: Party) -> Result<(), ProtocolError> {
        if caller != self.owner {
            return Err(ProtocolError::NotOwner {
                caller,
                owner: self.owner,
            });
        }
        Ok(())
    }

    fn check_bounds(&self, offset: u64, len: u64) -> Result<(), ProtocolError> {
        match offset.checked_add(len) {
            Some(end) if end <= self.layout.capacity_bytes => Ok(()),
            _ => Err(ProtocolError::OutOfBounds {
                offset,
                len,
                capacity: self.layout.capacity_bytes,
            }),
        }
    }

    fn raw_store(&mut self, offset: u64, data: &[u8], at_cycle: u64) {
        let start = offset as usize;
        self.memory[start..start + data.len()].copy_from_slice(data);
        self.write_log.push(WriteRecord {
            offset,
            len: data.len() as u64,
            completion_cycle: at_cycle,
        });
    }

    fn read_u64(&self, offset: u64) -> u64 {
        let start = offset as usize;
        u64::from_le_bytes(self.memory[start..start + 8].try_into().expect("8-byte slot"))
    }

    /// sbST: write `data` at `offset`, completing at `at_cycle`.
    pub fn store(&mut self, caller: Party, offset: u64, data: &[u8], at_cycle: u64) -> Result<(), ProtocolError> {
        self.check_owner(caller)?;
        self.check_bounds(offset, data.len() as u64)?;
        self.raw_store(offset, data, at_cycle);
        Ok(())
    }

    /// sbLD: read `len` bytes at `offset`.
    pub fn load(&self, caller: Party, offset: u64, len: u64) -> Result<&[u8], ProtocolError> {
        self.check_owner(caller)?;
        self.check_bounds(offset, len)?;
        Ok(&self.memory[offset as usize..(offset + len) as usize])
    }

    /// Writes the release register: the owner gives the buffer to its
    /// counterpart and the current write log closes as an epoch.
    pub fn release_ownership(&mut self, caller: Party, at_cycle: u64) -> Result<OwnershipTransfer, ProtocolError> {
        self.check_owner(caller)?;
        let to = match caller {
            Party::Host => Party::Accelerator(self.peer),
            Party::Accelerator(_) => Party::Host,
        };
        self.history.push(Epoch {
            index: self.history.len(),
            owner: caller,
            started_at: self.epoch_start,
            ended_at: at_cycle,
            writes: std::mem::take(&mut self.write_log),
        });
        self.epoch_start = at_cycle;
        self.owner = to;
        Ok(OwnershipTransfer {
            from: caller,
            to,
            at_cycle,
        })
    }

    /// Selects which accelerator receives the buffer at the host's next
    /// release. Only the host may retarget, and only while it holds the buffer.
    pub fn attach_accelerator(&mut self, caller: Party, accel_id: u32) -> Result<(), ProtocolError> {
        if caller != Party::Host {
            return Err(ProtocolError::NotOwner {
                caller,
                owner: Party::Host,
            });
        }
        self.check_owner(caller)?;
        self.peer = accel_id;
        Ok(())
    }

    fn fence_check(&self, flag_cycle: u64) -> Result<(), ProtocolError> {
        let late = self
            .write_log
            .iter()
            .filter(|w| self.layout.in_data_region(w.offset, w.len))
            .find(|w| w.completion_cycle > flag_cycle);
        match late {
            Some(w) => Err(ProtocolError::FenceViolation {
                offset: w.offset,
                write_cycle: w.completion_cycle,
                flag_cycle,
            }),
            None => Ok(()),
        }
    }

    /// Accelerator-side call into the host: publish the function id and
    /// arguments, raise the flag and hand the buffer to the host.
    ///
    /// Every data-region write of the current epoch must have completed no
    /// later than the flag write.
    pub fn invoke_host(
        &mut self,
        caller: Party,
        table: &FunctionTable,
        function_id: u64,
        args: InvokeArgs,
        at_cycle: u64,
    ) -> Result<InvocationRecord, ProtocolError> {
        let Party::Accelerator(accel_id) = caller else {
            return Err(ProtocolError::NotOwner {
                caller,
                owner: self.owner,
            });
        };
        self.check_owner(caller)?;
        let entry = table.lookup(function_id)?;
        if self.phase != FlagPhase::Low {
            return Err(ProtocolError::FlagAlreadyRaised);
        }
        if !self.layout.in_data_region(args.data_offset, args.data_len) {
            return Err(ProtocolError::OutOfBounds {
                offset: args.data_offset,
                len: args.data_len,
                capacity: self.layout.capacity_bytes,
            });
        }
        self.fence_check(at_cycle)?;

        let activation = entry.activation;
        let mut arg_block = Vec::with_capacity(24);
        for v in [args.element_count, args.data_offset, args.data_len] {
            arg_block.extend_from_slice(&v.to_le_bytes());
        }
        self.raw_store(self.layout.function_id_offset, &function_id.to_le_bytes(), at_cycle);
        self.raw_store(self.layout.arg_block_offset, &arg_block, at_cycle);
        self.raw_store(self.layout.flag_offset, &1u64.to_le_bytes(), at_cycle);
        self.phase = FlagPhase::Raised;
        self.invocations += 1;
        let transfer = self.release_ownership(caller, at_cycle)?;
        Ok(InvocationRecord {
            accel_id,
            function_id,
            activation,
            element_count: args.element_count,
            flag_cycle: at_cycle,
            transfer,
        })
    }

    /// Host-side decode of a raised flag.
    pub fn host_service(&mut self, table: &FunctionTable) -> Result<ServiceRequest, ProtocolError> {
        self.check_owner(Party::Host)?;
        if self.read_u64(self.layout.flag_offset) == 0 || self.phase != FlagPhase::Raised {
            return Err(ProtocolError::FlagNotRaised);
        }
        let function_id = self.read_u64(self.layout.function_id_offset);
        let entry = table.lookup(function_id)?;
        let base = self.layout.arg_block_offset;
        let args = InvokeArgs {
            element_count: self.read_u64(base),
            data_offset: self.read_u64(base + 8),
            data_len: self.read_u64(base + 16),
        };
        self.phase = FlagPhase::Serviced;
        self.services += 1;
        Ok(ServiceRequest {
            function_id,
            activation: entry.activation,
            args,
        })
    }

    /// Host return path: lower the flag once results are stored and release
    /// the buffer back to the attached accelerator. The same ordering rule
    /// as [`invoke_host`](Self::invoke_host) applies to the host's writes.
    pub fn complete_service(&mut self, at_cycle: u64) -> Result<OwnershipTransfer, ProtocolError> {
        self.check_owner(Party::Host)?;
        if self.phase != FlagPhase::Serviced {
            return Err(ProtocolError::FlagNotRaised);
        }
        self.fence_check(at_cycle)?;
        self.raw_store(self.layout.flag_offset, &0u64.to_le_bytes(), at_cycle);
        self.phase = FlagPhase::Low;
        self.completions += 1;
        self.release_ownership(Party::Host, at_cycle)
    }

    /// One line per closed epoch: index, owner, start, end, write count and
    /// the latest write completion (or `-`).
    pub fn export_history(&self) -> String {
        let mut out = String::new();
        for e in &self.history {
            let last = e
                .writes
                .iter()
                .map(|w| w.completion_cycle)
                .max()
                .map_or_else(|| "-".to_string(), |c| c.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                e.index,
                e.owner,
                e.started_at,
                e.ended_at,
                e.writes.len(),
                last
            ));
        }
        out
    }
}
