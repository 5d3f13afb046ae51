//! Deterministic grid search for transfer coefficients that land the
//! three scenarios inside target ratio bands.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sidebar_core::costmodel::{SimConfig, TransferParams};
use sidebar_core::scenarios::{Scenario, ScenarioContext, ScenarioError};
use sidebar_core::workload::{Activation, ActivationKind};
use thiserror::Error;

/// Template shipped with the binary; produces the shipped `default.cfg`.
pub const SHIPPED_TEMPLATE: &str = include_str!("../configs/calibrate.toml");

const CONFIG_PREAMBLE: &str = "# Calibrated transfer model. Regenerate with `sidebar-sim calibrate`.\n\
# Every link moves 4-byte (fp32) elements; the functional model computes in f64.\n\n";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRange {
    /// A `transfer` key, or `host_activation_cycles_per_element.<kind>`.
    pub field: String,
    pub min: f64,
    pub max: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bands {
    pub flexible_latency: Option<[f64; 2]>,
    pub sidebar_latency: Option<[f64; 2]>,
    pub flexible_energy: Option<[f64; 2]>,
    pub sidebar_energy: Option<[f64; 2]>,
    pub flexible_edp: Option<[f64; 2]>,
    pub sidebar_edp: Option<[f64; 2]>,
    /// Softplus (flexible - monolithic) latency gap at least the ReLU gap.
    #[serde(default)]
    pub require_widening: bool,
}

impl Bands {
    fn list(&self) -> [(&'static str, Option<[f64; 2]>); 6] {
        [
            ("flexible_latency", self.flexible_latency),
            ("sidebar_latency", self.sidebar_latency),
            ("flexible_energy", self.flexible_energy),
            ("sidebar_energy", self.sidebar_energy),
            ("flexible_edp", self.flexible_edp),
            ("sidebar_edp", self.sidebar_edp),
        ]
    }

    pub fn is_empty(&self) -> bool {
        self.list().iter().all(|(_, b)| b.is_none()) && !self.require_widening
    }
}

fn default_refine_steps() -> u32 {
    3
}

fn default_activations() -> Vec<ActivationKind> {
    vec![ActivationKind::Relu, ActivationKind::Softplus]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTemplate {
    #[serde(default)]
    pub refine_rounds: u32,
    #[serde(default = "default_refine_steps")]
    pub refine_steps: u32,
    #[serde(default = "default_activations")]
    pub activations: Vec<ActivationKind>,
    #[serde(default)]
    pub base: BTreeMap<String, toml::Value>,
    pub bands: Bands,
    #[serde(default)]
    pub search: Vec<SearchRange>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration template: {0}")]
    Template(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("no feasible point after {evaluations} evaluations")]
    NoFeasiblePoint { evaluations: u64, nearest: Box<Option<Candidate>> },
}

fn template_err(msg: impl Into<String>) -> CalibrationError {
    CalibrationError::Template(msg.into())
}

impl CalibrationTemplate {
    pub fn from_toml_str(text: &str) -> Result<Self, CalibrationError> {
        let t: CalibrationTemplate = toml::from_str(text).map_err(|e| template_err(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED_TEMPLATE).expect("shipped template is valid")
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.bands.is_empty() {
            return Err(template_err("`bands` must define at least one band"));
        }
        for (name, band) in self.bands.list() {
            if let Some([lo, hi]) = band {
                if !(lo <= hi) {
                    return Err(template_err(format!("bands.{name}: lower bound above upper bound")));
                }
            }
        }
        if self.activations.is_empty() {
            return Err(template_err("`activations` must not be empty"));
        }
        if self.bands.require_widening
            && !(self.activations.contains(&ActivationKind::Relu) && self.activations.contains(&ActivationKind::Softplus))
        {
            return Err(template_err("bands.require_widening needs relu and softplus in `activations`"));
        }
        if self.refine_rounds > 0 && self.refine_steps < 2 {
            return Err(template_err("refine_steps >= 2"));
        }
        let defaults = TransferParams::default();
        for s in &self.search {
            if s.steps == 0 || !(s.min <= s.max) {
                return Err(template_err(format!("search.{}: requires steps >= 1 and min <= max", s.field)));
            }
            set_field(&defaults, &s.field, &toml::Value::Float(s.min))?;
        }
        self.base_params()?;
        Ok(())
    }

    fn base_params(&self) -> Result<TransferParams, CalibrationError> {
        let mut p = TransferParams::default();
        for (field, value) in &self.base {
            p = set_field(&p, field, value)?;
        }
        Ok(p)
    }
}

/// Writes one coefficient by name, rounding for integer-valued fields.
pub fn set_field(params: &TransferParams, field: &str, value: &toml::Value) -> Result<TransferParams, CalibrationError> {
    let mut root = toml::Value::try_from(params).map_err(|e| template_err(e.to_string()))?;
    let mut slot = &mut root;
    for key in field.split('.') {
        slot = slot
            .as_table_mut()
            .and_then(|t| t.get_mut(key))
            .ok_or_else(|| template_err(format!("unknown transfer field `{field}`")))?;
    }
    let number = match value {
        toml::Value::Integer(i) => *i as f64,
        toml::Value::Float(f) => *f,
        other => return Err(template_err(format!("`{field}` must be numeric, got {other}"))),
    };
    *slot = match slot {
        toml::Value::Integer(_) => {
            if number < 0.0 {
                return Err(template_err(format!("`{field}` must be non-negative")));
            }
            toml::Value::Integer(number.round() as i64)
        }
        toml::Value::Float(_) => toml::Value::Float(number),
        _ => return Err(template_err(format!("`{field}` is not a coefficient"))),
    };
    root.try_into().map_err(|e: toml::de::Error| template_err(e.to_string()))
}

/// Reads one coefficient by name.
pub fn get_field(params: &TransferParams, field: &str) -> Option<f64> {
    let root = toml::Value::try_from(params).ok()?;
    let v = field.split('.').try_fold(&root, |v, k| v.get(k))?;
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

/// Advances a row-major grid index (last axis fastest); false once exhausted.
fn next_index(index: &mut [u32], axes: &[Axis]) -> bool {
    for k in (0..index.len()).rev() {
        index[k] += 1;
        if index[k] < axes[k].steps {
            return true;
        }
        index[k] = 0;
    }
    false
}

/// Ratios of one activation's three runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActivationMetrics {
    pub activation: ActivationKind,
    pub flexible_latency: f64,
    pub sidebar_latency: f64,
    pub flexible_energy: f64,
    pub sidebar_energy: f64,
    pub flexible_edp: f64,
    pub sidebar_edp: f64,
    /// Flexible minus monolithic latency, in cycles.
    pub flexible_gap: i64,
}

impl ActivationMetrics {
    fn value(&self, band: &str) -> f64 {
        match band {
            "flexible_latency" => self.flexible_latency,
            "sidebar_latency" => self.sidebar_latency,
            "flexible_energy" => self.flexible_energy,
            "sidebar_energy" => self.sidebar_energy,
            "flexible_edp" => self.flexible_edp,
            _ => self.sidebar_edp,
        }
    }
}

/// An evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub point: Vec<(String, f64)>,
    pub config: SimConfig,
    pub metrics: Vec<ActivationMetrics>,
    /// Sum of normalized band distances; zero when every band holds.
    pub miss: f64,
}

impl Candidate {
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "point (miss {:.6}):", self.miss);
        for (field, value) in &self.point {
            let _ = writeln!(out, "  {field} = {value}");
        }
        for m in &self.metrics {
            let _ = writeln!(
                out,
                "  {}: latency {:.4}/{:.4} energy {:.4}/{:.4} edp {:.4}/{:.4} (flexible/sidebar), flexible gap {} cycles",
                m.activation,
                m.flexible_latency,
                m.sidebar_latency,
                m.flexible_energy,
                m.sidebar_energy,
                m.flexible_edp,
                m.sidebar_edp,
                m.flexible_gap
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub best: Candidate,
    pub evaluations: u64,
    /// 0 for the coarse grid, k for the k-th refinement.
    pub round: u32,
}

fn band_distance(x: f64, [lo, hi]: [f64; 2]) -> f64 {
    let width = (hi - lo).max(1e-9);
    if x < lo {
        (lo - x) / width
    } else if x > hi {
        (x - hi) / width
    } else {
        0.0
    }
}

struct Evaluator {
    contexts: Vec<ScenarioContext>,
}

impl Evaluator {
    fn new(template: &CalibrationTemplate) -> Result<Self, CalibrationError> {
        let config = SimConfig::default();
        let contexts = template
            .activations
            .iter()
            .map(|&k| ScenarioContext::new(Activation::new(k), &config, 1).map(ScenarioContext::timing_only))
            .collect::<Result<_, _>>()?;
        Ok(Self { contexts })
    }

    /// `None` for points that violate the config invariants.
    fn evaluate(&mut self, config: &SimConfig, bands: &Bands) -> Result<Option<(Vec<ActivationMetrics>, f64)>, CalibrationError> {
        if config.validate().is_err() {
            return Ok(None);
        }
        let mut metrics = Vec::with_capacity(self.contexts.len());
        for ctx in &mut self.contexts {
            ctx.set_config(config)?;
            let clock_hz = config.transfer.clock_hz;
            let mut lat = [0u64; 3];
            let mut energy = [0f64; 3];
            let mut edp = [0f64; 3];
            for (i, sc) in Scenario::ALL.into_iter().enumerate() {
                let run = ctx.run(sc)?;
                let acc = run.state.accumulators();
                lat[i] = run.state.clock();
                energy[i] = acc.data_movement_pj();
                edp[i] = sidebar_core::costmodel::edp(lat[i], energy[i], clock_hz);
            }
            metrics.push(ActivationMetrics {
                activation: ctx.activation().kind,
                flexible_latency: lat[1] as f64 / lat[0] as f64,
                sidebar_latency: lat[2] as f64 / lat[0] as f64,
                flexible_energy: energy[1] / energy[0],
                sidebar_energy: energy[2] / energy[0],
                flexible_edp: edp[1] / edp[0],
                sidebar_edp: edp[2] / edp[0],
                flexible_gap: lat[1] as i64 - lat[0] as i64,
            });
        }
        let mut miss = 0.0;
        for m in &metrics {
            for (name, band) in bands.list() {
                if let Some(band) = band {
                    miss += band_distance(m.value(name), band);
                }
            }
        }
        if bands.require_widening {
            let gap = |k| metrics.iter().find(|m| m.activation == k).map(|m| m.flexible_gap);
            if let (Some(relu), Some(softplus)) = (gap(ActivationKind::Relu), gap(ActivationKind::Softplus)) {
                if softplus < relu {
                    miss += (relu - softplus) as f64 / relu.unsigned_abs().max(1) as f64;
                }
            }
        }
        Ok(Some((metrics, miss)))
    }
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    steps: u32,
}

impl Axis {
    fn value(&self, i: u32) -> f64 {
        if self.steps <= 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * f64::from(i) / f64::from(self.steps - 1)
        }
    }

    fn spacing(&self) -> f64 {
        if self.steps <= 1 {
            0.0
        } else {
            (self.hi - self.lo) / f64::from(self.steps - 1)
        }
    }
}

/// Runs the search: the template grid first, then `refine_rounds` finer
/// grids centred on the nearest miss so far, each spanning one spacing of
/// the previous grid on either side.
pub fn calibrate(template: &CalibrationTemplate) -> Result<Calibration, CalibrationError> {
    template.validate()?;
    let base = SimConfig {
        transfer: template.base_params()?,
        ..SimConfig::default()
    };
    let mut evaluator = Evaluator::new(template)?;
    let mut axes: Vec<Axis> = template
        .search
        .iter()
        .map(|s| Axis {
            lo: s.min,
            hi: s.max,
            steps: s.steps,
        })
        .collect();
    let mut nearest: Option<Candidate> = None;
    let mut evaluations = 0u64;

    for round in 0..=template.refine_rounds {
        let mut index = vec![0u32; axes.len()];
        loop {
            let mut config = base.clone();
            let mut point = Vec::with_capacity(axes.len());
            for ((axis, &i), range) in axes.iter().zip(&index).zip(&template.search) {
                let v = axis.value(i);
                config.transfer = set_field(&config.transfer, &range.field, &toml::Value::Float(v))?;
                let stored = get_field(&config.transfer, &range.field).unwrap_or(v);
                point.push((range.field.clone(), stored));
            }
            if let Some((metrics, miss)) = evaluator.evaluate(&config, &template.bands)? {
                evaluations += 1;
                let candidate = Candidate {
                    point,
                    config,
                    metrics,
                    miss,
                };
                if miss == 0.0 {
                    return Ok(Calibration {
                        best: candidate,
                        evaluations,
                        round,
                    });
                }
                if nearest.as_ref().is_none_or(|n| miss < n.miss) {
                    nearest = Some(candidate);
                }
            }
            if !next_index(&mut index, &axes) {
                break;
            }
        }
        let Some(centre) = &nearest else { break };
        axes = axes
            .iter()
            .zip(&template.search)
            .zip(&centre.point)
            .map(|((axis, range), (_, c))| {
                let h = axis.spacing();
                Axis {
                    lo: (c - h).max(range.min),
                    hi: (c + h).min(range.max),
                    steps: if h == 0.0 { 1 } else { template.refine_steps },
                }
            })
            .collect();
    }
    Err(CalibrationError::NoFeasiblePoint {
        evaluations,
        nearest: Box::new(nearest),
    })
}

/// The text written as `default.cfg`.
pub fn render_config(config: &SimConfig) -> String {
    format!("{CONFIG_PREAMBLE}{}", config.to_toml_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_field_rounds_integers() {
        let p = TransferParams::default();
        let q = set_field(&p, "dma_setup_cycles", &toml::Value::Float(1234.6)).unwrap();
        assert_eq!(q.dma_setup_cycles, 1235);
        let q = set_field(&p, "host_activation_cycles_per_element.softplus", &toml::Value::Integer(6)).unwrap();
        assert_eq!(q.per_element_cycles(ActivationKind::Softplus), Some(6.0));
        assert!(set_field(&p, "warp_factor", &toml::Value::Float(1.0)).is_err());
    }

    #[test]
    fn axis_values() {
        let a = Axis {
            lo: 20000.0,
            hi: 200000.0,
            steps: 10,
        };
        assert_eq!(a.value(0), 20000.0);
        assert_eq!(a.value(2), 60000.0);
        assert_eq!(a.value(9), 200000.0);
        assert_eq!(a.spacing(), 20000.0);
    }

    #[test]
    fn empty_bands_rejected() {
        let err = CalibrationTemplate::from_toml_str("[bands]\n").unwrap_err();
        assert!(err.to_string().contains("at least one band"));
    }

    #[test]
    fn unknown_search_field_rejected() {
        let text = "[bands]\nsidebar_latency = [0.0, 1.02]\n[[search]]\nfield = \"turbo\"\nmin = 1.0\nmax = 2.0\nsteps = 2\n";
        assert!(CalibrationTemplate::from_toml_str(text).unwrap_err().to_string().contains("turbo"));
    }
}
