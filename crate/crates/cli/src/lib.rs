//! Command-line driver: run scenarios, dump traces, calibrate the transfer model.

pub mod calibrate;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sidebar_core::costmodel::{ConfigError, SimConfig};
use sidebar_core::scenarios::{
    compare_with, ComparisonReport, Scenario, ScenarioContext, ScenarioError, SimReport, CSV_HEADER,
};
use sidebar_core::simcore::export_state;
use sidebar_core::workload::{Activation, ActivationKind, WorkloadError};
use thiserror::Error;

use calibrate::{calibrate, render_config, CalibrationError, CalibrationTemplate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CORRECTNESS: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sidebar-sim", version, about = "Host/accelerator data-movement simulator for a LeNet inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioSelect {
    All,
    One(Scenario),
}

impl FromStr for ScenarioSelect {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            Ok(ScenarioSelect::All)
        } else {
            s.parse().map(ScenarioSelect::One)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Human,
    Json,
    Csv,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Config file; the calibrated built-in config when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// ELU alpha, used only when `elu` is requested.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub elu_alpha: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate scenarios and print reports.
    Run {
        /// `all`, `monolithic`, `flexible_dma` or `sidebar`.
        #[arg(long, default_value = "all")]
        scenario: ScenarioSelect,
        /// Comma-separated activation kinds.
        #[arg(long, value_delimiter = ',', default_value = "relu,softplus")]
        activation: Vec<ActivationKind>,
        #[arg(long = "out", value_enum, default_value_t = OutputFormat::Human)]
        out: OutputFormat,
        /// Also write every run's event trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the event trace of one scenario.
    Trace {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long, default_value = "relu")]
        activation: ActivationKind,
        /// Also write the Sidebar ownership-epoch history to this file.
        #[arg(long)]
        epochs: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Search transfer coefficients that meet the target bands and print the config.
    Calibrate {
        /// Search template; the built-in template when omitted.
        #[arg(long)]
        template: Option<PathBuf>,
        /// Write the config here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Calibration(#[from] CalibrationError),
    #[error("i/o error on `{path}`: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(e) if e.is_correctness_failure() => EXIT_CORRECTNESS,
            CliError::Calibration(CalibrationError::Scenario(e)) if e.is_correctness_failure() => EXIT_CORRECTNESS,
            _ => EXIT_CONFIG,
        }
    }
}

fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn load_config(common: &Common) -> Result<(SimConfig, String), CliError> {
    match &common.config {
        Some(path) => Ok((SimConfig::load(path)?, path.display().to_string())),
        None => Ok((SimConfig::shipped(), "built-in default.cfg".to_string())),
    }
}

fn activation(kind: ActivationKind, common: &Common) -> Result<Activation, CliError> {
    if kind == ActivationKind::Elu {
        Activation::elu(common.elu_alpha).map_err(|e| CliError::Usage(format!("--elu-alpha: {e}")))
    } else {
        Ok(Activation::new(kind))
    }
}

#[derive(Serialize)]
struct RunDocument<'a> {
    seed: u64,
    config: &'a str,
    reports: Vec<&'a SimReport>,
    comparisons: &'a [ComparisonReport],
}

fn run_command(
    scenario: ScenarioSelect,
    activations: &[ActivationKind],
    out_format: OutputFormat,
    trace: Option<&PathBuf>,
    common: &Common,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (config, config_name) = load_config(common)?;
    if activations.is_empty() {
        return Err(CliError::Usage("--activation: at least one activation".into()));
    }
    let acts = activations
        .iter()
        .map(|&k| activation(k, common))
        .collect::<Result<Vec<_>, _>>()?;

    let mut reports = Vec::new();
    let mut comparisons = Vec::new();
    let mut traces = String::new();
    for act in acts {
        let ctx = ScenarioContext::new(act, &config, common.seed)?;
        match scenario {
            ScenarioSelect::All => {
                let cmp = compare_with(&ctx)?;
                if trace.is_some() {
                    for sc in Scenario::ALL {
                        traces.push_str(&export_state(&ctx.run(sc)?.state));
                    }
                }
                comparisons.push(cmp);
            }
            ScenarioSelect::One(sc) => {
                let run = ctx.run(sc)?;
                if trace.is_some() {
                    traces.push_str(&export_state(&run.state));
                }
                reports.push(SimReport::from_run(&ctx, &run)?);
            }
        }
    }
    if let Some(path) = trace {
        std::fs::write(path, traces).map_err(|e| io_err(path, e))?;
    }

    let all_reports: Vec<&SimReport> = reports
        .iter()
        .chain(comparisons.iter().flat_map(|c| c.reports.iter()))
        .collect();
    let text = match out_format {
        OutputFormat::Json => {
            let doc = RunDocument {
                seed: common.seed,
                config: &config_name,
                reports: all_reports,
                comparisons: &comparisons,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut s = format!("{CSV_HEADER}\n");
            for r in &reports {
                s.push_str(&r.csv_rows());
            }
            for c in &comparisons {
                s.push_str(&c.csv_rows());
            }
            s
        }
        OutputFormat::Human => {
            let mut s = format!("seed {}  config {}\n\n", common.seed, config_name);
            for r in &reports {
                s.push_str(&format!(
                    "{:<14}{:<12}latency {:>10} cycles  data movement {:>12.0} pJ  edp {:.4e} J*s  digest {:016x}\n",
                    r.scenario.name(),
                    r.activation.name(),
                    r.latency_cycles,
                    r.energy_pj.total_data_movement,
                    r.edp,
                    r.trace_digest
                ));
            }
            for c in &comparisons {
                s.push_str(&c.table());
                s.push('\n');
            }
            s
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| io_err(std::path::Path::new("<stdout>"), e))
}

fn trace_command(
    scenario: Scenario,
    kind: ActivationKind,
    epochs: Option<&PathBuf>,
    common: &Common,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let (config, _) = load_config(common)?;
    let ctx = ScenarioContext::new(activation(kind, common)?, &config, common.seed)?;
    let run = ctx.run(scenario)?;
    if let Some(path) = epochs {
        std::fs::write(path, &run.epoch_history).map_err(|e| io_err(path, e))?;
    }
    out.write_all(export_state(&run.state).as_bytes())
        .map_err(|e| io_err(std::path::Path::new("<stdout>"), e))
}

fn calibrate_command(
    template: Option<&PathBuf>,
    output: Option<&PathBuf>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let template = match template {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            CalibrationTemplate::from_toml_str(&text)?
        }
        None => CalibrationTemplate::shipped(),
    };
    let result = match calibrate(&template) {
        Ok(r) => r,
        Err(CalibrationError::NoFeasiblePoint { evaluations, nearest }) => {
            let _ = writeln!(err, "no feasible point after {evaluations} evaluations");
            if let Some(n) = nearest.as_ref() {
                let _ = write!(err, "nearest miss {}", n.report());
            }
            return Err(CalibrationError::NoFeasiblePoint { evaluations, nearest }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let _ = writeln!(
        err,
        "feasible after {} evaluations (refinement round {})",
        result.evaluations, result.round
    );
    let _ = write!(err, "{}", result.best.report());
    let text = render_config(&result.best.config);
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| io_err(path, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| io_err(std::path::Path::new("<stdout>"), e)),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_CONFIG
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Run {
            scenario,
            activation,
            out: format,
            trace,
            common,
        } => run_command(*scenario, activation, *format, trace.as_ref(), common, out),
        Command::Trace {
            scenario,
            activation,
            epochs,
            common,
        } => trace_command(*scenario, *activation, epochs.as_ref(), common, out),
        Command::Calibrate { template, output } => calibrate_command(template.as_ref(), output.as_ref(), out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
