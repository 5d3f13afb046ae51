use serde::{Deserialize, Serialize};

use crate::costmodel::ConfigError;

/// Width of the flag and function-id slots.
pub const SLOT_BYTES: u64 = 8;
/// The argument block holds element count, data offset and data length.
pub const MIN_ARG_BLOCK_BYTES: u64 = 24;

/// Fixed placement of the control slots and the data region, agreed between
/// driver and accelerator ahead of time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidebarLayout {
    pub capacity_bytes: u64,
    pub flag_offset: u64,
    pub function_id_offset: u64,
    pub arg_block_offset: u64,
    pub arg_block_len: u64,
    /// Start of the intermediate-data region, which runs to the end of the buffer.
    pub data_offset: u64,
}

impl Default for SidebarLayout {
    fn default() -> Self {
        Self {
            capacity_bytes: 64 * 1024,
            flag_offset: 0,
            function_id_offset: 8,
            arg_block_offset: 16,
            arg_block_len: 64,
            data_offset: 128,
        }
    }
}

impl SidebarLayout {
    pub fn flag_range(&self) -> (u64, u64) {
        (self.flag_offset, self.flag_offset + SLOT_BYTES)
    }

    pub fn function_id_range(&self) -> (u64, u64) {
        (self.function_id_offset, self.function_id_offset + SLOT_BYTES)
    }

    pub fn arg_block_range(&self) -> (u64, u64) {
        (self.arg_block_offset, self.arg_block_offset + self.arg_block_len)
    }

    pub fn data_range(&self) -> (u64, u64) {
        (self.data_offset, self.capacity_bytes)
    }

    pub fn data_capacity(&self) -> u64 {
        self.capacity_bytes.saturating_sub(self.data_offset)
    }

    pub fn in_data_region(&self, offset: u64, len: u64) -> bool {
        offset >= self.data_offset && offset + len <= self.capacity_bytes
    }

    /// The four regions must be disjoint and inside the buffer.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, c: String| ConfigError::Invalid {
            field: format!("sidebar.{field}"),
            constraint: c,
        };
        if self.arg_block_len < MIN_ARG_BLOCK_BYTES {
            return Err(invalid(
                "arg_block_len",
                format!("arg_block_len >= {MIN_ARG_BLOCK_BYTES}"),
            ));
        }
        let regions = [
            ("flag_offset", self.flag_range()),
            ("function_id_offset", self.function_id_range()),
            ("arg_block_offset", self.arg_block_range()),
            ("data_offset", self.data_range()),
        ];
        for (name, (start, end)) in regions {
            if start >= end || end > self.capacity_bytes {
                return Err(invalid(
                    name,
                    format!("region [{start}, {end}) non-empty and within capacity_bytes {}", self.capacity_bytes),
                ));
            }
        }
        for (i, (a, (a0, a1))) in regions.iter().enumerate() {
            for (b, (b0, b1)) in &regions[i + 1..] {
                if a0 < b1 && b0 < a1 {
                    return Err(invalid(
                        b,
                        format!("{b} region [{b0}, {b1}) disjoint from {a} region [{a0}, {a1})"),
                    ));
                }
            }
        }
        Ok(())
    }
}
