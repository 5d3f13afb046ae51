use proptest::prelude::*;
use sidebar_core::costmodel::{dma_cost, sidebar_cost, SimConfig, TransferParams};
use sidebar_core::scenarios::{Scenario, ScenarioContext};
use sidebar_core::simcore::{poll_delay, poll_observe_cycle};
use sidebar_core::workload::{Activation, ActivationKind};

fn activation_kind() -> impl Strategy<Value = ActivationKind> {
    prop::sample::select(ActivationKind::ALL.to_vec())
}

/// Valid transfer coefficients. `poll_cap` bounds the poll interval by the
/// DMA setup time when set.
fn transfer_params(poll_cap: bool) -> impl Strategy<Value = TransferParams> {
    (
        (1u64..64, 0u64..64, 1u64..100, 1u64..100),
        (1u64..20_000, 0.0f64..100_000.0, 1u64..1_000),
        (0.5f64..80.0, 0.01f64..1.0, 1.0f64..8.0),
        (1u64..4, 1u64..2_000_000, 1u64..2_000),
        prop::collection::vec(0.1f64..30.0, 7),
        prop::sample::select(vec![16u64, 32, 64, 128]),
    )
        .prop_map(
            move |((bw, extra_sbw, flush, inval), (setup, setup_e, poll), (dram, sb_frac, sl_frac), (host_mul, host_setup, overhead), per, line)| {
                let mut p = TransferParams {
                    cache_line_bytes: line,
                    bus_bytes_per_cycle: bw,
                    sidebar_bytes_per_cycle: bw + extra_sbw,
                    flush_cycles_per_line: flush,
                    invalidate_cycles_per_line: inval,
                    sidebar_latency_cycles: (((flush + inval) as f64) / sl_frac).max(1.0) as u64,
                    dma_setup_cycles: setup,
                    dma_setup_energy_pj: setup_e,
                    dram_energy_pj_per_byte: dram,
                    sidebar_energy_pj_per_byte: dram * sb_frac * 0.99,
                    host_poll_interval_cycles: if poll_cap { poll.min(setup) } else { poll * host_mul },
                    host_setup_cycles: host_setup,
                    host_call_overhead_cycles: overhead,
                    ..TransferParams::default()
                };
                for (kind, v) in ActivationKind::ALL.into_iter().zip(per) {
                    p.host_activation_cycles_per_element.insert(kind, v);
                }
                p
            },
        )
}

proptest! {
    #[test]
    fn activations_are_monotone(kind in activation_kind(), a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let f = Activation::new(kind);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(f.apply(lo) <= f.apply(hi), "{kind}: f({lo}) > f({hi})");
    }

    #[test]
    fn activation_ranges(x in -700.0f64..700.0, alpha in 0.01f64..5.0) {
        let y = |k| Activation::new(k).apply(x);
        prop_assert!((0.0..=1.0).contains(&y(ActivationKind::Sigmoid)));
        prop_assert!((-1.0..=1.0).contains(&y(ActivationKind::Tanh)));
        prop_assert!(y(ActivationKind::Softplus) >= y(ActivationKind::Relu));
        prop_assert!(y(ActivationKind::Softplus) >= 0.0);
        prop_assert!(y(ActivationKind::Relu) >= 0.0);
        let heaviside = y(ActivationKind::Heaviside);
        prop_assert!(heaviside == 0.0 || heaviside == 1.0);
        let elu = Activation::elu(alpha).unwrap().apply(x);
        prop_assert!(elu >= -alpha && elu.is_finite());
        prop_assert!(y(ActivationKind::LeakyRelu) <= y(ActivationKind::Relu) || x > 0.0);
    }

    #[test]
    fn config_round_trip(p in transfer_params(false)) {
        let config = SimConfig { transfer: p, ..SimConfig::default() };
        config.validate().unwrap();
        let back = SimConfig::from_toml_str(&config.to_toml_string()).unwrap();
        prop_assert_eq!(back, config);
    }

    #[test]
    fn sidebar_never_costlier_than_dma(p in transfer_params(false), bytes in 1u64..100_000) {
        let dma = dma_cost(bytes, &p);
        let sb = sidebar_cost(bytes, &p);
        prop_assert!(sb.cycles <= dma.cycles);
        prop_assert!(sb.energy_pj < dma.energy_pj);
        prop_assert!(dma_cost(bytes + 1, &p).cycles >= dma.cycles);
    }

    #[test]
    fn poll_observes_next_boundary(t in 0u64..10_000_000, interval in 1u64..10_000) {
        let seen = poll_observe_cycle(t, interval);
        prop_assert!(seen >= t);
        prop_assert_eq!(seen % interval, 0);
        prop_assert!(poll_delay(t, interval) < interval);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Monolithic <= Sidebar < Flexible for latency (ReLU, whose five
    /// primitives together outlast the monolithic kernel) and for
    /// data-movement energy (both activations).
    #[test]
    fn scenario_ordering(p in transfer_params(true)) {
        let config = SimConfig { transfer: p, ..SimConfig::default() };
        for kind in [ActivationKind::Relu, ActivationKind::Softplus] {
            let ctx = ScenarioContext::new(Activation::new(kind), &config, 1).unwrap().timing_only();
            let runs: Vec<_> = Scenario::ALL.iter().map(|&s| ctx.run(s).unwrap()).collect();
            let lat: Vec<u64> = runs.iter().map(|r| r.state.clock()).collect();
            let energy: Vec<f64> = runs.iter().map(|r| r.state.accumulators().data_movement_pj()).collect();
            if kind == ActivationKind::Relu {
                prop_assert!(lat[0] <= lat[2], "latency mono {} > sidebar {}", lat[0], lat[2]);
            }
            prop_assert!(lat[2] < lat[1], "{kind}: latency sidebar {} >= flexible {}", lat[2], lat[1]);
            prop_assert!(energy[0] <= energy[2]);
            prop_assert!(energy[2] < energy[1]);
        }
    }
}

#[test]
fn invalid_configs_name_the_field() {
    let mut c = SimConfig::shipped();
    c.transfer.sidebar_energy_pj_per_byte = c.transfer.dram_energy_pj_per_byte + 1.0;
    let e = c.validate().unwrap_err().to_string();
    assert!(e.contains("sidebar_energy_pj_per_byte"), "{e}");

    let mut c = SimConfig::shipped();
    c.transfer.bus_bytes_per_cycle = 0;
    assert!(c.validate().unwrap_err().to_string().contains("bus_bytes_per_cycle"));

    let mut c = SimConfig::shipped();
    c.transfer.sidebar_latency_cycles = 10_000;
    assert!(c.validate().unwrap_err().to_string().contains("sidebar_latency_cycles"));
}
