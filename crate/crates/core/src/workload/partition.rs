use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{apply_activation, Activation, ModelGraph, Tensor, WorkloadError};
use crate::costmodel::{AcceleratorSpec, AcceleratorTable, WIRE_BYTES_PER_ELEMENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    /// One accelerator computes every layer and activation.
    Monolithic,
    /// One primitive per run of layers between activations; activations go to the host.
    Flexible,
}

impl FromStr for PartitionMode {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "monolithic" => Ok(PartitionMode::Monolithic),
            "flexible" => Ok(PartitionMode::Flexible),
            other => Err(WorkloadError::Usage(format!("unknown partition mode `{other}`"))),
        }
    }
}

impl fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionMode::Monolithic => f.write_str("monolithic"),
            PartitionMode::Flexible => f.write_str("flexible"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelStage {
    pub accel_id: u32,
    pub layer_indices: Vec<usize>,
    pub spec: AcceleratorSpec,
    /// Activation evaluated inside the kernel at every site it covers.
    pub fused_activation: Option<Activation>,
    pub input_elements: usize,
    pub output_elements: usize,
    pub parameter_elements: usize,
    pub input_bytes: u64,
    pub output_bytes: u64,
    pub parameter_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostActivationStage {
    pub activation: Activation,
    pub after_layer: usize,
    pub element_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stage {
    AcceleratorKernel(KernelStage),
    HostActivation(HostActivationStage),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub mode: PartitionMode,
    pub stages: Vec<Stage>,
}

fn wire_bytes(elements: usize) -> u64 {
    elements as u64 * WIRE_BYTES_PER_ELEMENT
}

fn kernel(
    model: &ModelGraph,
    accel_id: u32,
    layer_indices: Vec<usize>,
    spec: AcceleratorSpec,
    fused_activation: Option<Activation>,
) -> KernelStage {
    let first = &model.layers[layer_indices[0]];
    let last = &model.layers[*layer_indices.last().expect("non-empty kernel")];
    let parameter_elements = layer_indices
        .iter()
        .map(|&i| model.layers[i].parameter_count())
        .sum();
    KernelStage {
        accel_id,
        spec,
        fused_activation,
        input_elements: first.input_elements(),
        output_elements: last.output_elements(),
        parameter_elements,
        input_bytes: wire_bytes(first.input_elements()),
        output_bytes: wire_bytes(last.output_elements()),
        parameter_bytes: wire_bytes(parameter_elements),
        layer_indices,
    }
}

/// Splits `model` into accelerator stages using the shipped accelerator table.
pub fn partition(model: &ModelGraph, mode: PartitionMode) -> Result<StagePlan, WorkloadError> {
    partition_with(model, mode, &AcceleratorTable::shipped())
}

/// Splits `model` into accelerator stages.
///
/// Monolithic plans look up `<activation>_mono` in `table`. Flexible plans cut
/// the layer list after every activation site and assign `s1`, `s2`, ... to
/// the resulting runs. For LeNet this yields S1 = conv1, S2 = pool1 + conv2,
/// S3 = pool2 + fc1, S4 = fc2 and S5 = fc3; the grouping is inferred from the
/// rule that a primitive holds the layers between two activations.
pub fn partition_with(
    model: &ModelGraph,
    mode: PartitionMode,
    table: &AcceleratorTable,
) -> Result<StagePlan, WorkloadError> {
    model.validate()?;
    if model.layers.is_empty() {
        return Err(WorkloadError::config("model has no layers"));
    }
    let stages = match mode {
        PartitionMode::Monolithic => {
            let activation = model.activation_sites.first().map(|s| s.activation);
            if model
                .activation_sites
                .iter()
                .any(|s| Some(s.activation) != activation)
            {
                return Err(WorkloadError::config(
                    "monolithic accelerator needs a single activation kind",
                ));
            }
            let spec = match activation {
                Some(act) => table
                    .monolithic(act.kind)
                    .ok_or(WorkloadError::NoMonolithicSpec(act.kind))?
                    .clone(),
                None => table
                    .get("mono")
                    .ok_or_else(|| WorkloadError::config("no spec named `mono` for an activation-free model"))?
                    .clone(),
            };
            let layers = (0..model.layers.len()).collect();
            vec![Stage::AcceleratorKernel(kernel(model, 0, layers, spec, activation))]
        }
        PartitionMode::Flexible => {
            let mut stages = Vec::new();
            let mut current = Vec::new();
            let mut next_id = 1u32;
            for index in 0..model.layers.len() {
                current.push(index);
                let site = model.activation_after(index).copied();
                let is_last = index + 1 == model.layers.len();
                if site.is_some() || is_last {
                    let name = format!("s{next_id}");
                    let spec = table
                        .get(&name)
                        .ok_or_else(|| WorkloadError::config(format!("no accelerator spec named `{name}`")))?
                        .clone();
                    stages.push(Stage::AcceleratorKernel(kernel(
                        model,
                        next_id,
                        std::mem::take(&mut current),
                        spec,
                        None,
                    )));
                    next_id += 1;
                }
                if let Some(activation) = site {
                    stages.push(Stage::HostActivation(HostActivationStage {
                        activation,
                        after_layer: index,
                        element_count: model.layers[index].output_elements(),
                    }));
                }
            }
            stages
        }
    };
    let plan = StagePlan { mode, stages };
    plan.validate(model)?;
    Ok(plan)
}

impl StagePlan {
    pub fn kernels(&self) -> impl Iterator<Item = &KernelStage> {
        self.stages.iter().filter_map(|s| match s {
            Stage::AcceleratorKernel(k) => Some(k),
            Stage::HostActivation(_) => None,
        })
    }

    pub fn host_activations(&self) -> impl Iterator<Item = &HostActivationStage> {
        self.stages.iter().filter_map(|s| match s {
            Stage::HostActivation(h) => Some(h),
            Stage::AcceleratorKernel(_) => None,
        })
    }

    /// Checks coverage: kernel layers concatenate to every layer exactly
    /// once, in order, and every activation site is either fused into the
    /// kernel that covers it or appears as a host stage.
    pub fn validate(&self, model: &ModelGraph) -> Result<(), WorkloadError> {
        let covered: Vec<usize> = self.kernels().flat_map(|k| k.layer_indices.iter().copied()).collect();
        if covered != (0..model.layers.len()).collect::<Vec<_>>() {
            return Err(WorkloadError::config(format!(
                "plan covers layers {covered:?}, expected 0..{}",
                model.layers.len()
            )));
        }
        let mut host_sites = self.host_activations().map(|h| h.after_layer);
        for site in &model.activation_sites {
            let fused = self.kernels().any(|k| {
                k.fused_activation.is_some() && k.layer_indices.contains(&site.after_layer)
            });
            if !fused && host_sites.next() != Some(site.after_layer) {
                return Err(WorkloadError::config(format!(
                    "activation after layer {} is not covered by the plan",
                    site.after_layer
                )));
            }
        }
        if host_sites.next().is_some() {
            return Err(WorkloadError::config("plan has host activations at no model site"));
        }
        Ok(())
    }
}

/// Executes the layers of one kernel, including any fused activations.
pub fn run_kernel(model: &ModelGraph, stage: &KernelStage, input: &Tensor) -> Result<Tensor, WorkloadError> {
    let mut x = input.clone();
    for &index in &stage.layer_indices {
        x = model.layers[index].forward(&x)?;
        if let (Some(act), Some(_)) = (stage.fused_activation, model.activation_after(index)) {
            x = apply_activation(&x, &act)?;
        }
    }
    Ok(x)
}

/// Functional replay of a plan: kernels run their layers and host stages
/// apply their activation.
pub fn execute_plan(model: &ModelGraph, plan: &StagePlan, input: &Tensor) -> Result<Tensor, WorkloadError> {
    let mut x = input.clone();
    for stage in &plan.stages {
        x = match stage {
            Stage::AcceleratorKernel(k) => run_kernel(model, k, &x)?,
            Stage::HostActivation(h) => apply_activation(&x, &h.activation)?,
        };
    }
    Ok(x)
}

/// Spec names of the plan's kernels, in execution order.
pub fn kernel_names(plan: &StagePlan) -> Vec<&str> {
    plan.kernels().map(|k| k.spec.name.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{build_lenet, lenet_input, ActivationKind};

    fn model(kind: ActivationKind) -> ModelGraph {
        build_lenet(Activation::new(kind), 5).unwrap()
    }

    #[test]
    fn monolithic_single_stage() {
        let plan = partition(&model(ActivationKind::Relu), PartitionMode::Monolithic).unwrap();
        assert_eq!(plan.stages.len(), 1);
        let k = plan.kernels().next().unwrap();
        assert_eq!(k.spec.cycles, 122_151);
        assert_eq!(k.input_bytes, 12_288);
        assert_eq!(k.output_bytes, 40);
        assert_eq!(k.parameter_bytes, 248_024);

        let plan = partition(&model(ActivationKind::Softplus), PartitionMode::Monolithic).unwrap();
        assert_eq!(plan.kernels().next().unwrap().spec.cycles, 147_967);
    }

    #[test]
    fn monolithic_needs_spec() {
        let err = partition(&model(ActivationKind::Elu), PartitionMode::Monolithic).unwrap_err();
        assert!(matches!(err, WorkloadError::NoMonolithicSpec(ActivationKind::Elu)));
    }

    #[test]
    fn flexible_nine_stages() {
        let plan = partition(&model(ActivationKind::Relu), PartitionMode::Flexible).unwrap();
        assert_eq!(plan.stages.len(), 9);
        for (i, stage) in plan.stages.iter().enumerate() {
            assert_eq!(matches!(stage, Stage::AcceleratorKernel(_)), i % 2 == 0);
        }
        let cycles: Vec<u64> = plan.kernels().map(|k| k.spec.cycles).collect();
        assert_eq!(cycles, vec![23124, 22541, 66060, 17847, 2546]);
        let layers: Vec<Vec<usize>> = plan.kernels().map(|k| k.layer_indices.clone()).collect();
        assert_eq!(layers, vec![vec![0], vec![1, 2], vec![3, 4], vec![5], vec![6]]);
        let counts: Vec<usize> = plan.host_activations().map(|h| h.element_count).collect();
        assert_eq!(counts, vec![4704, 1600, 120, 84]);
        assert_eq!(kernel_names(&plan), vec!["s1", "s2", "s3", "s4", "s5"]);
        let inputs: Vec<usize> = plan.kernels().map(|k| k.input_elements).collect();
        assert_eq!(inputs, vec![3072, 4704, 1600, 120, 84]);
    }

    #[test]
    fn both_plans_replay_to_the_forward_pass() {
        for kind in ActivationKind::ALL {
            let m = model(kind);
            let input = lenet_input(5);
            let direct = m.forward(&input).unwrap();
            let flex = partition(&m, PartitionMode::Flexible).unwrap();
            assert!(execute_plan(&m, &flex, &input).unwrap().bit_identical(&direct), "{kind}");
            if let Ok(mono) = partition(&m, PartitionMode::Monolithic) {
                assert!(execute_plan(&m, &mono, &input).unwrap().bit_identical(&direct), "{kind}");
            }
        }
    }

    #[test]
    fn validate_catches_missing_host_stage() {
        let m = model(ActivationKind::Relu);
        let mut plan = partition(&m, PartitionMode::Flexible).unwrap();
        plan.stages.remove(3);
        assert!(plan.validate(&m).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Flexible".parse::<PartitionMode>().unwrap(), PartitionMode::Flexible);
        assert!(matches!("pipelined".parse::<PartitionMode>(), Err(WorkloadError::Usage(_))));
    }
}
