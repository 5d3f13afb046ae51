//! The LeNet workload: tensors, layers, activations and the partitioner that
//! turns the network into accelerator stages.

mod activation;
mod layers;
mod lenet;
mod partition;
pub mod rng;
mod tensor;

use thiserror::Error;

pub use activation::{apply_activation, Activation, ActivationKind, LEAKY_RELU_SLOPE};
pub use layers::{conv2d, fully_connected, maxpool2d, LayerKind, LayerSpec};
pub use lenet::{build_lenet, lenet_input, ActivationSite, ModelGraph, LENET_INPUT_SHAPE, WEIGHT_RANGE};
pub use partition::{
    execute_plan, kernel_names, partition, partition_with, run_kernel, HostActivationStage, KernelStage,
    PartitionMode, Stage, StagePlan,
};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("invalid tensor shape {0:?}: dimensions must be positive")]
    InvalidShape(Vec<usize>),
    #[error("tensor shape {shape:?} needs {expected} values, got {actual}")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },
    #[error("byte image of {0} bytes is not a whole number of f64 values")]
    ByteImage(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("elu_alpha must be positive and finite, got {0}")]
    EluAlpha(f64),
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
    #[error("no monolithic spec for activation `{0}`")]
    NoMonolithicSpec(ActivationKind),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
}

impl WorkloadError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        WorkloadError::Config(msg.into())
    }
}
