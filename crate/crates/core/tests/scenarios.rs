use sidebar_core::costmodel::{dma_cost, primitives, SimConfig, TransferParams};
use sidebar_core::protocol::ProtocolError;
use sidebar_core::scenarios::{
    compare, run_flexible_dma, run_monolithic, run_sidebar, Scenario, ScenarioContext, ScenarioError,
};
use sidebar_core::simcore::{
    check_single_timeline, export_state, parse_trace, spans, trace_hash, Accumulators, Action, Device, Interval,
};
use sidebar_core::workload::{Activation, ActivationKind, WorkloadError};

fn shipped() -> SimConfig {
    SimConfig::shipped()
}

fn relu() -> Activation {
    Activation::new(ActivationKind::Relu)
}

fn softplus() -> Activation {
    Activation::new(ActivationKind::Softplus)
}

fn run(sc: Scenario, act: Activation, config: &SimConfig) -> sidebar_core::scenarios::SimRun {
    ScenarioContext::new(act, config, 1).unwrap().run(sc).unwrap()
}

fn count(run: &sidebar_core::scenarios::SimRun, interval: Interval) -> usize {
    spans(run.state.trace())
        .unwrap()
        .iter()
        .filter(|s| s.interval == interval)
        .count()
}

fn kernel_cycles(run: &sidebar_core::scenarios::SimRun) -> Vec<u64> {
    spans(run.state.trace())
        .unwrap()
        .iter()
        .filter(|s| s.interval == Interval::Kernel)
        .map(|s| s.end - s.start)
        .collect()
}

#[test]
fn monolithic_accelerator_segment() {
    let c = shipped();
    let r = run_monolithic(relu(), &c, 1).unwrap();
    assert_eq!(r.cycles.accelerator, 122_151);
    assert_eq!(r.energy_pj.accelerator, 724_294_354.0);
    let s = run_monolithic(softplus(), &c, 1).unwrap();
    assert_eq!(s.cycles.accelerator - r.cycles.accelerator, 147_967 - 122_151);
    assert_eq!(s.cycles.accelerator - r.cycles.accelerator, 25_816);
}

#[test]
fn monolithic_timeline_is_one_dma_pair() {
    let c = shipped();
    let m = run(Scenario::Monolithic, relu(), &c);
    assert_eq!(count(&m, Interval::DmaLoad), 1);
    assert_eq!(count(&m, Interval::DmaStore), 1);
    assert_eq!(count(&m, Interval::Kernel), 1);
    let p = &c.transfer;
    let expected = p.host_setup_cycles + dma_cost(12_288 + 248_024, p).cycles + 122_151 + dma_cost(40, p).cycles;
    assert_eq!(m.state.clock(), expected);
}

#[test]
fn elu_has_no_monolithic_spec() {
    let err = run_monolithic(Activation::new(ActivationKind::Elu), &shipped(), 1).unwrap_err();
    assert!(matches!(err, ScenarioError::Workload(WorkloadError::NoMonolithicSpec(ActivationKind::Elu))));
    assert!(err.to_string().contains("no monolithic spec"));
    assert!(!err.is_correctness_failure());
    run_sidebar(Activation::new(ActivationKind::Elu), &shipped(), 1).unwrap();
    run_flexible_dma(Activation::new(ActivationKind::Elu), &shipped(), 1).unwrap();
}

#[test]
fn flexible_structure() {
    let c = shipped();
    for act in [relu(), softplus(), Activation::new(ActivationKind::Tanh)] {
        let f = run(Scenario::FlexibleDma, act, &c);
        assert_eq!(kernel_cycles(&f), [23_124, 22_541, 66_060, 17_847, 2_546]);
        assert_eq!(kernel_cycles(&f).iter().sum::<u64>(), 132_118);
        assert_eq!(f.state.accumulators().cycles.accelerator, 132_118);
        // five in, five out, plus the parameter load
        assert_eq!(count(&f, Interval::DmaLoad), 6);
        assert_eq!(count(&f, Interval::DmaStore), 5);
        assert_eq!(count(&f, Interval::HostCompute), 4);
        let energies: Vec<f64> = f
            .state
            .trace()
            .iter()
            .filter(|e| e.action == Action::KernelEnd)
            .map(|e| e.cost.energy_pj)
            .collect();
        let table: Vec<f64> = primitives().iter().map(|p| p.energy as f64).collect();
        assert_eq!(energies, table);
    }
}

#[test]
fn bus_and_sidebar_bytes() {
    let c = shipped();
    for act in [relu(), softplus()] {
        let cmp = compare(act, &c, 1).unwrap();
        let m = cmp.report(Scenario::Monolithic);
        let f = cmp.report(Scenario::FlexibleDma);
        let s = cmp.report(Scenario::Sidebar);
        assert_eq!(m.bus_bytes, 12_288 + 248_024 + 40);
        assert_eq!(s.bus_bytes, m.bus_bytes);
        assert!(f.bus_bytes > m.bus_bytes);
        assert_eq!(f.bus_bytes, 248_024 + 4 * (3072 + 4704 + 1600 + 120 + 84 + 4704 + 1600 + 120 + 84 + 10));
        assert_eq!(s.sidebar_bytes, 2 * (4704 + 1600 + 120 + 84) * 4);
        assert_eq!(s.sidebar_bytes, 52_064);
        assert_eq!(m.sidebar_bytes, 0);
        assert_eq!(f.sidebar_bytes, 0);
        assert_eq!(s.invocations, 4);
    }
}

#[test]
fn sidebar_epochs_and_flags() {
    let s = run(Scenario::Sidebar, relu(), &shipped());
    let trace = s.state.trace();
    let raises = trace.iter().filter(|e| e.action == Action::FlagRaise).count();
    let observes = trace.iter().filter(|e| e.action == Action::FlagObserve).count();
    assert_eq!((raises, observes), (4, 4));
    // each invocation is two handovers: accelerator to host, host back
    assert_eq!(trace.iter().filter(|e| e.action == Action::OwnershipTransfer).count(), 8);
    assert_eq!(s.epoch_history.lines().count(), 8);
    // the poll observes on an interval boundary
    let interval = shipped().transfer.host_poll_interval_cycles;
    for e in trace.iter().filter(|e| e.action == Action::FlagObserve) {
        assert_eq!(e.at_cycle % interval, 0);
    }
    assert_eq!(count(&s, Interval::HostCompute), 4);
    assert_eq!(kernel_cycles(&s), [23_124, 22_541, 66_060, 17_847, 2_546]);
}

#[test]
fn ratios_of_monolithic_are_exactly_one() {
    let cmp = compare(relu(), &shipped(), 1).unwrap();
    let r = cmp.ratios(Scenario::Monolithic);
    assert_eq!((r.latency_ratio, r.energy_ratio, r.edp_ratio), (1.0, 1.0, 1.0));
    for rep in &cmp.reports {
        assert_eq!(
            rep.energy_pj.total_data_movement,
            rep.energy_pj.dram_bus + rep.energy_pj.sidebar
        );
    }
}

#[test]
fn outputs_bit_identical_across_scenarios() {
    let c = shipped();
    for kind in ActivationKind::ALL {
        let act = Activation::new(kind);
        let f = run_flexible_dma(act, &c, 3).unwrap();
        let s = run_sidebar(act, &c, 3).unwrap();
        assert!(f.functional_output.bit_identical(&s.functional_output), "{kind}");
        assert_eq!(f.functional_output.len(), 10);
    }
    for act in [relu(), softplus()] {
        compare(act, &c, 2).unwrap();
    }
}

#[test]
fn conservation_and_replay() {
    let c = shipped();
    for sc in Scenario::ALL {
        let r = run(sc, softplus(), &c);
        let acc = r.state.accumulators();
        let quote_cycles: u64 = r.state.trace().iter().map(|e| e.cost.cycles).sum();
        assert_eq!(quote_cycles, r.state.clock(), "{sc}");
        assert_eq!(acc.cycles.total(), r.state.clock());
        let energy: f64 = r.state.trace().iter().map(|e| e.cost.energy_pj).sum();
        let folded = acc.energy.dram_bus + acc.energy.sidebar + acc.energy.accelerator;
        assert!((energy - folded).abs() <= 1e-9 * folded);

        let (header, events) = parse_trace(&export_state(&r.state)).unwrap();
        assert_eq!(header, r.state.header());
        assert_eq!(events, r.state.trace());
        assert_eq!(Accumulators::fold(&events), *acc);
        check_single_timeline(&events).unwrap();
    }
}

#[test]
fn trace_events_nondecreasing_and_device_tags() {
    let r = run(Scenario::Sidebar, relu(), &shipped());
    let t = r.state.trace();
    assert!(t.windows(2).all(|w| w[0].at_cycle <= w[1].at_cycle));
    assert!(t.iter().any(|e| e.device == Device::DmaEngine));
    assert!(t.iter().any(|e| e.device == Device::Accel(5)));
    assert!(t.iter().any(|e| e.device == Device::Sidebar));
}

#[test]
fn deterministic_digests() {
    let c = shipped();
    let a = run(Scenario::FlexibleDma, relu(), &c);
    let b = run(Scenario::FlexibleDma, relu(), &c);
    assert_eq!(export_state(&a.state), export_state(&b.state));
    assert_eq!(trace_hash(&a.state), trace_hash(&b.state));
}

/// Perturbs each transfer coefficient in turn, keeping the config valid.
fn perturbations(base: &TransferParams) -> Vec<(&'static str, TransferParams)> {
    let mut v = Vec::new();
    macro_rules! bump {
        ($field:ident, $val:expr) => {{
            let mut p = base.clone();
            p.$field = $val;
            v.push((stringify!($field), p));
        }};
    }
    bump!(clock_hz, base.clock_hz * 2);
    bump!(cache_line_bytes, base.cache_line_bytes * 2);
    bump!(dma_setup_cycles, base.dma_setup_cycles + 1);
    bump!(dma_setup_energy_pj, base.dma_setup_energy_pj + 1.0);
    bump!(flush_cycles_per_line, base.flush_cycles_per_line + 1);
    bump!(invalidate_cycles_per_line, base.invalidate_cycles_per_line + 1);
    bump!(bus_bytes_per_cycle, base.bus_bytes_per_cycle + 1);
    bump!(dram_energy_pj_per_byte, base.dram_energy_pj_per_byte + 0.5);
    bump!(sidebar_latency_cycles, base.sidebar_latency_cycles + 1);
    bump!(sidebar_bytes_per_cycle, base.sidebar_bytes_per_cycle + 1);
    bump!(sidebar_energy_pj_per_byte, base.sidebar_energy_pj_per_byte + 0.5);
    bump!(host_poll_interval_cycles, base.host_poll_interval_cycles + 1);
    bump!(host_call_overhead_cycles, base.host_call_overhead_cycles + 1);
    bump!(host_setup_cycles, base.host_setup_cycles + 1);
    for kind in ActivationKind::ALL {
        let mut p = base.clone();
        *p.host_activation_cycles_per_element.get_mut(&kind).unwrap() += 0.25;
        v.push((kind.name(), p));
    }
    v
}

#[test]
fn every_transfer_field_changes_the_flexible_digest() {
    let base = shipped();
    let reference = trace_hash(&run(Scenario::FlexibleDma, relu(), &base).state);
    let perturbed = perturbations(&base.transfer);
    assert_eq!(perturbed.len(), 14 + 7);
    for (field, p) in perturbed {
        let config = SimConfig {
            transfer: p,
            ..base.clone()
        };
        config.validate().unwrap_or_else(|e| panic!("{field}: {e}"));
        let digest = trace_hash(&run(Scenario::FlexibleDma, relu(), &config).state);
        assert_ne!(digest, reference, "{field}");
    }
}

#[test]
fn capacity_exceeded_when_intermediate_does_not_fit() {
    let mut c = shipped();
    c.sidebar.capacity_bytes = 32 * 1024;
    let err = run_sidebar(relu(), &c, 1).unwrap_err();
    assert!(matches!(err, ScenarioError::Protocol(ProtocolError::CapacityExceeded { needed: 37_632, .. })));
    assert!(err.is_correctness_failure());
    // DMA-only scenarios never touch the buffer
    run_flexible_dma(relu(), &c, 1).unwrap();
}

#[test]
fn relocated_layout_gives_same_costs() {
    let base = shipped();
    let mut moved = base.clone();
    moved.sidebar.flag_offset = 96;
    moved.sidebar.function_id_offset = 104;
    moved.sidebar.arg_block_offset = 8;
    moved.sidebar.arg_block_len = 80;
    moved.sidebar.data_offset = 256;
    let a = run_sidebar(relu(), &base, 1).unwrap();
    let b = run_sidebar(relu(), &moved, 1).unwrap();
    assert_eq!(a.latency_cycles, b.latency_cycles);
    assert!(a.functional_output.bit_identical(&b.functional_output));
    assert_ne!(a.trace_digest, b.trace_digest);
}

#[test]
fn timing_only_matches_full_run_costs() {
    let c = shipped();
    let full = ScenarioContext::new(softplus(), &c, 1).unwrap();
    let fast = full.clone().timing_only();
    for sc in Scenario::ALL {
        let a = full.run(sc).unwrap();
        let b = fast.run(sc).unwrap();
        assert_eq!(a.state.trace(), b.state.trace(), "{sc}");
        assert!(b.output.is_none());
    }
}

#[test]
fn widening_delta_on_shipped_config() {
    let c = shipped();
    let gap = |act| {
        let cmp = compare(act, &c, 1).unwrap();
        cmp.report(Scenario::FlexibleDma).latency_cycles as i64 - cmp.report(Scenario::Monolithic).latency_cycles as i64
    };
    assert!(gap(softplus()) >= gap(relu()));
}
