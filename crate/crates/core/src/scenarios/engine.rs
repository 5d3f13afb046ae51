use crate::costmodel::{
    accelerator_cost, dma_cost, host_activation_cost, sidebar_cost, AcceleratorTable, CostQuote, SimConfig,
    WIRE_BYTES_PER_ELEMENT,
};
use crate::protocol::{FunctionTable, InvokeArgs, Party, ProtocolError, SidebarBuffer};
use crate::simcore::{check_single_timeline, Action, Device, Interval, SimState};
use crate::workload::{
    apply_activation, build_lenet, lenet_input, partition_with, run_kernel, Activation, HostActivationStage,
    KernelStage, ModelGraph, PartitionMode, Stage, StagePlan, Tensor,
};

use super::{Scenario, ScenarioError};

/// Bytes of the functional (f64) image of `n` elements held in the Sidebar.
const IMAGE_BYTES_PER_ELEMENT: u64 = 8;

/// Everything fixed for one (activation, config, seed): the model, its
/// input and both stage plans.
#[derive(Debug, Clone)]
pub struct ScenarioContext {
    config: SimConfig,
    table: AcceleratorTable,
    activation: Activation,
    seed: u64,
    model: ModelGraph,
    input: Tensor,
    functional: bool,
}

/// The raw outcome of one scenario run.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub scenario: Scenario,
    pub state: SimState,
    pub output: Option<Tensor>,
    /// Closed Sidebar epochs, one line each (empty for DMA-only scenarios).
    pub epoch_history: String,
    pub invocations: u64,
}

impl ScenarioContext {
    pub fn new(activation: Activation, config: &SimConfig, seed: u64) -> Result<Self, ScenarioError> {
        config.validate()?;
        Ok(Self {
            table: config.accelerator_table()?,
            config: config.clone(),
            activation,
            seed,
            model: build_lenet(activation, seed)?,
            input: lenet_input(seed),
            functional: true,
        })
    }

    /// Skips the arithmetic and the trace header; events and costs are unchanged.
    pub fn timing_only(mut self) -> Self {
        self.functional = false;
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> &ModelGraph {
        &self.model
    }

    /// Replaces the config, keeping the model. Accelerator overrides are re-read.
    pub fn set_config(&mut self, config: &SimConfig) -> Result<(), ScenarioError> {
        config.validate()?;
        self.table = config.accelerator_table()?;
        self.config = config.clone();
        Ok(())
    }

    pub fn plan(&self, mode: PartitionMode) -> Result<StagePlan, ScenarioError> {
        Ok(partition_with(&self.model, mode, &self.table)?)
    }

    fn header(&self, scenario: Scenario) -> Vec<String> {
        let mut h = vec![
            format!("scenario={scenario}"),
            format!("activation={}", self.activation.kind),
            format!("elu_alpha={}", self.activation.elu_alpha),
            format!("seed={}", self.seed),
        ];
        h.extend(
            self.config
                .to_toml_string()
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| format!("config {l}")),
        );
        h
    }

    pub fn run(&self, scenario: Scenario) -> Result<SimRun, ScenarioError> {
        let header = if self.functional { self.header(scenario) } else { Vec::new() };
        let mut state = SimState::with_header(header);
        let mut run = match scenario {
            Scenario::Monolithic => self.monolithic(&mut state)?,
            Scenario::FlexibleDma => self.flexible(&mut state)?,
            Scenario::Sidebar => self.sidebar(&mut state)?,
        };
        check_single_timeline(state.trace())?;
        run.state = state;
        Ok(run)
    }

    fn host_setup(&self, state: &mut SimState) -> Result<(), ScenarioError> {
        let q = CostQuote::cycles(self.config.transfer.host_setup_cycles);
        state.advance(q, Interval::HostSetup, Device::Host, 0, "allocate and map arrays")?;
        Ok(())
    }

    fn dma(&self, state: &mut SimState, interval: Interval, bytes: u64, detail: String) -> Result<(), ScenarioError> {
        let q = dma_cost(bytes, &self.config.transfer);
        state.advance(q, interval, Device::DmaEngine, bytes, detail)?;
        Ok(())
    }

    fn kernel(&self, state: &mut SimState, k: &KernelStage, x: Option<Tensor>) -> Result<Option<Tensor>, ScenarioError> {
        let q = accelerator_cost(&k.spec, &self.config.transfer);
        state.advance(q, Interval::Kernel, Device::Accel(k.accel_id), 0, k.spec.name.clone())?;
        match x {
            Some(x) if self.functional => Ok(Some(run_kernel(&self.model, k, &x)?)),
            _ => Ok(None),
        }
    }

    fn host_activation(&self, state: &mut SimState, h: &HostActivationStage) -> Result<(), ScenarioError> {
        let n = h.element_count as u64;
        let q = host_activation_cost(h.activation.kind, n, &self.config.transfer)?;
        state.advance(q, Interval::HostCompute, Device::Host, 0, format!("{} x{n}", h.activation.kind))?;
        Ok(())
    }

    fn initial_input(&self) -> Option<Tensor> {
        self.functional.then(|| self.input.clone())
    }

    fn total_parameter_bytes(plan: &StagePlan) -> u64 {
        plan.kernels().map(|k| k.parameter_bytes).sum()
    }

    fn first_input_bytes(plan: &StagePlan) -> u64 {
        plan.kernels().next().map_or(0, |k| k.input_bytes)
    }

    fn last_output_bytes(plan: &StagePlan) -> u64 {
        plan.kernels().last().map_or(0, |k| k.output_bytes)
    }

    fn monolithic(&self, state: &mut SimState) -> Result<SimRun, ScenarioError> {
        let plan = self.plan(PartitionMode::Monolithic)?;
        let k = plan.kernels().next().expect("monolithic plan has one kernel");
        self.host_setup(state)?;
        self.dma(
            state,
            Interval::DmaLoad,
            Self::first_input_bytes(&plan) + Self::total_parameter_bytes(&plan),
            format!("input+params -> {}", k.spec.name),
        )?;
        let out = self.kernel(state, k, self.initial_input())?;
        self.dma(state, Interval::DmaStore, k.output_bytes, format!("{} -> host", k.spec.name))?;
        Ok(SimRun {
            scenario: Scenario::Monolithic,
            state: SimState::new(),
            output: out,
            epoch_history: String::new(),
            invocations: 0,
        })
    }

    fn flexible(&self, state: &mut SimState) -> Result<SimRun, ScenarioError> {
        let plan = self.plan(PartitionMode::Flexible)?;
        self.host_setup(state)?;
        self.dma(state, Interval::DmaLoad, Self::total_parameter_bytes(&plan), "params -> s1..s5".into())?;
        let mut x = self.initial_input();
        for stage in &plan.stages {
            match stage {
                Stage::AcceleratorKernel(k) => {
                    let name = &k.spec.name;
                    self.dma(state, Interval::DmaLoad, k.input_bytes, format!("host -> {name}"))?;
                    x = self.kernel(state, k, x)?;
                    self.dma(state, Interval::DmaStore, k.output_bytes, format!("{name} -> host"))?;
                }
                Stage::HostActivation(h) => {
                    self.host_activation(state, h)?;
                    if let Some(t) = &x {
                        x = Some(apply_activation(t, &h.activation)?);
                    }
                }
            }
        }
        Ok(SimRun {
            scenario: Scenario::FlexibleDma,
            state: SimState::new(),
            output: x,
            epoch_history: String::new(),
            invocations: 0,
        })
    }

    /// Largest intermediate image must fit the data region.
    fn check_capacity(&self, plan: &StagePlan) -> Result<(), ScenarioError> {
        let needed = plan
            .host_activations()
            .map(|h| h.element_count as u64 * IMAGE_BYTES_PER_ELEMENT)
            .max()
            .unwrap_or(0);
        let available = self.config.sidebar.data_capacity();
        if needed > available {
            return Err(ProtocolError::CapacityExceeded { needed, available }.into());
        }
        Ok(())
    }

    fn sidebar(&self, state: &mut SimState) -> Result<SimRun, ScenarioError> {
        let plan = self.plan(PartitionMode::Flexible)?;
        self.check_capacity(&plan)?;
        let params = &self.config.transfer;
        let layout = self.config.sidebar;
        let table = FunctionTable::standard().with_activation(self.activation);
        let kernels: Vec<&KernelStage> = plan.kernels().collect();
        let first = kernels.first().expect("flexible plan has kernels");
        let last = kernels.last().expect("flexible plan has kernels");
        let mut buffer = SidebarBuffer::new(layout, first.accel_id)?;

        self.host_setup(state)?;
        self.dma(
            state,
            Interval::DmaLoad,
            Self::first_input_bytes(&plan) + Self::total_parameter_bytes(&plan),
            format!("input+params -> {}", first.spec.name),
        )?;

        let mut x = self.initial_input();
        let mut next_kernel = kernels.iter().skip(1);
        let mut current = *first;
        for stage in &plan.stages {
            let h = match stage {
                Stage::AcceleratorKernel(k) => {
                    x = self.kernel(state, k, x)?;
                    current = k;
                    continue;
                }
                Stage::HostActivation(h) => h,
            };
            let accel = Party::Accelerator(current.accel_id);
            let accel_dev = Device::Accel(current.accel_id);
            let n = h.element_count as u64;
            let wire = n * WIRE_BYTES_PER_ELEMENT;
            let shape = x.as_ref().map(|t| t.shape().to_vec());

            // accelerator parks its result in the data region
            let image = x.as_ref().map(Tensor::to_le_bytes).unwrap_or_default();
            buffer.store(accel, layout.data_offset, &image, state.clock())?;
            state.advance(CostQuote::ZERO, Interval::SbWrite, accel_dev, wire, format!("{} result", current.spec.name))?;

            let function_id = table
                .id_of(h.activation.kind)
                .ok_or(ProtocolError::UnknownFunction(u64::MAX))?;
            let args = InvokeArgs {
                element_count: n,
                data_offset: layout.data_offset,
                data_len: n * IMAGE_BYTES_PER_ELEMENT,
            };
            let record = buffer.invoke_host(accel, &table, function_id, args, state.clock())?;
            state.mark(accel_dev, Action::FlagRaise, 0, format!("fn={function_id} {} n={n}", record.activation.kind));
            state.mark(Device::Sidebar, Action::OwnershipTransfer, 0, format!("{} -> {}", record.transfer.from, record.transfer.to));

            state.wait_for_poll(params.host_poll_interval_cycles, format!("fn={function_id}"))?;
            let request = buffer.host_service(&table)?;
            if request.activation != h.activation || request.args != args {
                return Err(ScenarioError::HostDecode(format!(
                    "host decoded {:?} / {:?}, expected {:?} / {:?}",
                    request.activation, request.args, h.activation, args
                )));
            }

            state.advance(sidebar_cost(wire, params), Interval::SbRead, Device::Host, wire, format!("sbLD x{n}"))?;
            let fetched = shape
                .as_ref()
                .map(|_| {
                    let bytes = buffer.load(Party::Host, request.args.data_offset, request.args.data_len)?;
                    Tensor::from_le_bytes(vec![n as usize], bytes).map_err(ScenarioError::from)
                })
                .transpose()?;
            self.host_activation(state, h)?;
            let result = fetched.map(|t| apply_activation(&t, &request.activation)).transpose()?;
            let (_, stored_at) =
                state.advance(sidebar_cost(wire, params), Interval::SbWrite, Device::Host, wire, format!("sbST x{n}"))?;
            if let Some(r) = &result {
                buffer.store(Party::Host, request.args.data_offset, &r.to_le_bytes(), stored_at)?;
            }

            let next = next_kernel.next().expect("every host activation is followed by a kernel");
            buffer.attach_accelerator(Party::Host, next.accel_id)?;
            let back = buffer.complete_service(state.clock())?;
            state.mark(Device::Sidebar, Action::OwnershipTransfer, 0, format!("{} -> {}; flag low", back.from, back.to));

            let next_party = Party::Accelerator(next.accel_id);
            state.advance(CostQuote::ZERO, Interval::SbRead, Device::Accel(next.accel_id), wire, format!("{} operand", next.spec.name))?;
            x = match (result, shape) {
                (Some(_), Some(shape)) => {
                    let bytes = buffer.load(next_party, layout.data_offset, n * IMAGE_BYTES_PER_ELEMENT)?;
                    Some(Tensor::from_le_bytes(shape, bytes)?)
                }
                _ => None,
            };
        }
        self.dma(state, Interval::DmaStore, Self::last_output_bytes(&plan), format!("{} -> host", last.spec.name))?;

        let (raised, serviced, lowered) = buffer.flag_counts();
        if raised != serviced || serviced != lowered {
            return Err(ScenarioError::HostDecode(format!(
                "flag lifecycle raised={raised} serviced={serviced} lowered={lowered}"
            )));
        }
        Ok(SimRun {
            scenario: Scenario::Sidebar,
            state: SimState::new(),
            output: x,
            epoch_history: buffer.export_history(),
            invocations: raised,
        })
    }
}
