use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use super::{Scenario, ScenarioContext, ScenarioError, SimRun};
use crate::costmodel::{edp, SimConfig};
use crate::simcore::{trace_hash, CycleTotals};
use crate::workload::{Activation, ActivationKind, Tensor};

/// Column line of the tidy CSV output.
pub const CSV_HEADER: &str = "seed,scenario,activation,metric,value";

fn hex_digest<S: Serializer>(digest: &u64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{digest:016x}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub dram_bus: f64,
    pub sidebar: f64,
    pub accelerator: f64,
    pub total_data_movement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub scenario: Scenario,
    pub activation: ActivationKind,
    pub elu_alpha: f64,
    pub seed: u64,
    pub latency_cycles: u64,
    pub energy_pj: EnergyReport,
    pub bus_bytes: u64,
    pub sidebar_bytes: u64,
    pub cycles: CycleTotals,
    /// Latency times data-movement energy, in J*s.
    pub edp: f64,
    /// Latency times data-movement plus accelerator energy, in J*s.
    pub edp_with_accelerator: f64,
    #[serde(serialize_with = "hex_digest")]
    pub trace_digest: u64,
    pub invocations: u64,
    pub functional_output: Tensor,
}

impl SimReport {
    /// Builds the report of a functional run.
    pub fn from_run(ctx: &ScenarioContext, run: &SimRun) -> Result<Self, ScenarioError> {
        let acc = run.state.accumulators();
        let clock_hz = ctx.config().transfer.clock_hz;
        let latency = run.state.clock();
        let dm = acc.data_movement_pj();
        let output = run.output.clone().ok_or_else(|| {
            ScenarioError::HostDecode("report requested for a timing-only run".into())
        })?;
        Ok(SimReport {
            scenario: run.scenario,
            activation: ctx.activation().kind,
            elu_alpha: ctx.activation().elu_alpha,
            seed: ctx.seed(),
            latency_cycles: latency,
            energy_pj: EnergyReport {
                dram_bus: acc.energy.dram_bus,
                sidebar: acc.energy.sidebar,
                accelerator: acc.energy.accelerator,
                total_data_movement: dm,
            },
            bus_bytes: acc.bus_bytes,
            sidebar_bytes: acc.sidebar_bytes,
            cycles: acc.cycles,
            edp: edp(latency, dm, clock_hz),
            edp_with_accelerator: edp(latency, dm + acc.energy.accelerator, clock_hz),
            trace_digest: trace_hash(&run.state),
            invocations: run.invocations,
            functional_output: output,
        })
    }

    fn metrics(&self) -> [(&'static str, String); 9] {
        [
            ("latency_cycles", self.latency_cycles.to_string()),
            ("energy_dram_bus_pj", self.energy_pj.dram_bus.to_string()),
            ("energy_sidebar_pj", self.energy_pj.sidebar.to_string()),
            ("energy_accelerator_pj", self.energy_pj.accelerator.to_string()),
            ("energy_data_movement_pj", self.energy_pj.total_data_movement.to_string()),
            ("edp_js", self.edp.to_string()),
            ("bus_bytes", self.bus_bytes.to_string()),
            ("sidebar_bytes", self.sidebar_bytes.to_string()),
            ("trace_digest", format!("{:016x}", self.trace_digest)),
        ]
    }

    /// Tidy CSV rows (no header line).
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (metric, value) in self.metrics() {
            let _ = writeln!(out, "{},{},{},{metric},{value}", self.seed, self.scenario, self.activation);
        }
        out
    }
}

/// Ratios of one scenario to the monolithic baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratios {
    pub scenario: Scenario,
    pub latency_ratio: f64,
    pub energy_ratio: f64,
    pub edp_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub activation: ActivationKind,
    pub seed: u64,
    /// Monolithic, FlexibleDma, Sidebar.
    pub reports: Vec<SimReport>,
    pub ratios: Vec<Ratios>,
}

impl ComparisonReport {
    fn assemble(reports: Vec<SimReport>) -> Self {
        let base = &reports[0];
        let ratios = reports
            .iter()
            .map(|r| Ratios {
                scenario: r.scenario,
                latency_ratio: r.latency_cycles as f64 / base.latency_cycles as f64,
                energy_ratio: r.energy_pj.total_data_movement / base.energy_pj.total_data_movement,
                edp_ratio: r.edp / base.edp,
            })
            .collect();
        ComparisonReport {
            activation: base.activation,
            seed: base.seed,
            reports,
            ratios,
        }
    }

    pub fn report(&self, scenario: Scenario) -> &SimReport {
        self.reports
            .iter()
            .find(|r| r.scenario == scenario)
            .expect("comparison holds every scenario")
    }

    pub fn ratios(&self, scenario: Scenario) -> &Ratios {
        self.ratios
            .iter()
            .find(|r| r.scenario == scenario)
            .expect("comparison holds every scenario")
    }

    pub fn table(&self) -> String {
        let mut out = format!("activation {}  seed {}\n", self.activation, self.seed);
        let _ = writeln!(
            out,
            "{:<14}{:>14}{:>20}{:>14}{:>10}{:>10}{:>10}",
            "scenario", "latency_cyc", "data_movement_pj", "edp_js", "lat_x", "energy_x", "edp_x"
        );
        for (r, q) in self.reports.iter().zip(&self.ratios) {
            let _ = writeln!(
                out,
                "{:<14}{:>14}{:>20.0}{:>14.4e}{:>10.4}{:>10.4}{:>10.4}",
                r.scenario.name(),
                r.latency_cycles,
                r.energy_pj.total_data_movement,
                r.edp,
                q.latency_ratio,
                q.energy_ratio,
                q.edp_ratio
            );
        }
        out
    }

    /// Per-scenario rows followed by the ratio rows.
    pub fn csv_rows(&self) -> String {
        let mut out: String = self.reports.iter().map(SimReport::csv_rows).collect();
        for q in &self.ratios {
            for (metric, value) in [
                ("latency_ratio", q.latency_ratio),
                ("energy_ratio", q.energy_ratio),
                ("edp_ratio", q.edp_ratio),
            ] {
                let _ = writeln!(out, "{},{},{},{metric},{value}", self.seed, q.scenario, self.activation);
            }
        }
        out
    }
}

pub fn run_scenario(
    scenario: Scenario,
    activation: Activation,
    config: &SimConfig,
    seed: u64,
) -> Result<SimReport, ScenarioError> {
    let ctx = ScenarioContext::new(activation, config, seed)?;
    let run = ctx.run(scenario)?;
    SimReport::from_run(&ctx, &run)
}

pub fn run_monolithic(activation: Activation, config: &SimConfig, seed: u64) -> Result<SimReport, ScenarioError> {
    run_scenario(Scenario::Monolithic, activation, config, seed)
}

pub fn run_flexible_dma(activation: Activation, config: &SimConfig, seed: u64) -> Result<SimReport, ScenarioError> {
    run_scenario(Scenario::FlexibleDma, activation, config, seed)
}

pub fn run_sidebar(activation: Activation, config: &SimConfig, seed: u64) -> Result<SimReport, ScenarioError> {
    run_scenario(Scenario::Sidebar, activation, config, seed)
}

/// Runs all three scenarios on separate threads and checks that each
/// output is bit-identical to the direct forward pass.
pub fn compare(activation: Activation, config: &SimConfig, seed: u64) -> Result<ComparisonReport, ScenarioError> {
    let ctx = ScenarioContext::new(activation, config, seed)?;
    compare_with(&ctx)
}

pub fn compare_with(ctx: &ScenarioContext) -> Result<ComparisonReport, ScenarioError> {
    let runs: Vec<Result<SimRun, ScenarioError>> = std::thread::scope(|s| {
        let handles: Vec<_> = Scenario::ALL.map(|sc| s.spawn(move || ctx.run(sc))).into();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    });
    let reference = ctx.model().forward(&crate::workload::lenet_input(ctx.seed()))?;
    let mut reports = Vec::with_capacity(3);
    for run in runs {
        let report = SimReport::from_run(ctx, &run?)?;
        if !report.functional_output.bit_identical(&reference) {
            let index = report
                .functional_output
                .data()
                .iter()
                .zip(reference.data())
                .position(|(a, b)| a.to_bits() != b.to_bits())
                .unwrap_or(0);
            return Err(ScenarioError::FunctionalMismatch {
                activation: ctx.activation().kind,
                scenario: report.scenario,
                index,
            });
        }
        reports.push(report);
    }
    Ok(ComparisonReport::assemble(reports))
}
