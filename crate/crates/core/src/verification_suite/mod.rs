//! Named end-to-end checks. Each scenario composes the numerical modules,
//! turns every claim into a [`Metric`], and reports pass only when all
//! metrics hold.

mod output;
mod scenarios;

pub use output::{format_f64, write_outputs, write_report_csv, Summary, CSV_HEADER};

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::cli::config::RunConfig;
use crate::discretization::{assemble_divergence_form, DiscreteOperator, Grid1D};
use crate::error::{Error, Result};
use crate::measure_models::DensityModel;
use crate::nash_verifier::{estimate_nash_constant, probe_family, NashConstant, Probe};
use crate::spectral_engine::{eigendecompose, SpectralDecomposition};

/// Registered scenarios, in report order.
pub const SCENARIOS: [&str; 13] = [
    "shifted-power-comparison",
    "jensen-convexity",
    "gamma-recursion",
    "fractional-nash-gap",
    "high-order-nash-gap",
    "balakrishnan",
    "subordination",
    "kernel-bound",
    "kernel-bound-high-order",
    "kernel-exponent",
    "lyapunov-cauchy",
    "lyapunov-exponential",
    "schrodinger-equivalence",
];

pub const DEGRADED_FLAG: &str = "degraded-resolution";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// `value <= reference + tolerance`
    AtMost,
    /// `value >= reference - tolerance`
    AtLeast,
    /// `|value - reference| <= tolerance`
    Near,
    /// `|value - reference| <= tolerance |reference|`
    Relative,
    /// Reported only.
    Info,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::AtMost => "at-most",
            Check::AtLeast => "at-least",
            Check::Near => "near",
            Check::Relative => "relative",
            Check::Info => "info",
        }
    }

    pub fn holds(self, value: f64, reference: f64, tolerance: f64) -> bool {
        match self {
            Check::AtMost => value <= reference + tolerance,
            Check::AtLeast => value >= reference - tolerance,
            Check::Near => (value - reference).abs() <= tolerance,
            Check::Relative => (value - reference).abs() <= tolerance * reference.abs(),
            Check::Info => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub check: Check,
    pub pass: bool,
    /// Worst offending input, or context.
    pub detail: String,
}

impl Metric {
    pub fn new(name: impl Into<String>, value: f64, check: Check, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            tolerance,
            check,
            pass: check.holds(value, reference, tolerance),
            detail: String::new(),
        }
    }

    /// `value <= bound`, recorded as reference 0 with tolerance `bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Check::AtMost, 0.0, bound)
    }

    /// `value >= bound`, recorded as reference 0 with tolerance `-bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value, Check::AtLeast, 0.0, -bound)
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self::new(name, value, Check::Info, f64::NAN, f64::NAN)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub status: Status,
    pub metrics: Vec<Metric>,
    pub config_digest: String,
    pub seed: u64,
    pub flags: Vec<String>,
    /// Set when the scenario aborted; no metrics are then reported.
    pub error: Option<String>,
    #[serde(skip)]
    pub error_code: Option<i32>,
}

impl VerificationReport {
    fn from_metrics(scenario: &str, config: &RunConfig, metrics: Vec<Metric>, flags: Vec<String>) -> Self {
        let pass = metrics.iter().all(|m| m.pass);
        Self {
            scenario: scenario.to_string(),
            status: if pass { Status::Pass } else { Status::Fail },
            metrics,
            config_digest: config.digest(),
            seed: config.seed,
            flags,
            error: None,
            error_code: None,
        }
    }

    fn from_error(scenario: &str, config: &RunConfig, err: &Error) -> Self {
        Self {
            scenario: scenario.to_string(),
            status: Status::Fail,
            metrics: Vec::new(),
            config_digest: config.digest(),
            seed: config.seed,
            flags: Vec::new(),
            error: Some(err.to_string()),
            error_code: Some(err.exit_code()),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Scenario output before the report wrapper is added.
pub(crate) struct Outcome {
    pub metrics: Vec<Metric>,
    pub flags: Vec<String>,
}

impl Outcome {
    pub fn new(metrics: Vec<Metric>) -> Self {
        Self {
            metrics,
            flags: Vec::new(),
        }
    }
}

type Cached<T> = OnceLock<std::result::Result<Arc<T>, Error>>;

fn cached<T, F: FnOnce() -> Result<T>>(cell: &Cached<T>, init: F) -> Result<Arc<T>> {
    match cell.get_or_init(|| init().map(Arc::new)) {
        Ok(v) => Ok(Arc::clone(v)),
        Err(e) => Err(e.replicate()),
    }
}

/// Model, grid and operator of a configuration, with the expensive
/// spectral data computed once on first use and shared by all scenarios.
pub struct Workspace {
    pub config: RunConfig,
    pub model: DensityModel,
    pub grid: Grid1D,
    pub op: DiscreteOperator,
    /// `V = rho^{-1/2}` at the nodes.
    pub v: Vec<f64>,
    dec: Cached<SpectralDecomposition>,
    probes: Cached<Vec<Probe>>,
    nash: Cached<NashConstant>,
}

impl Workspace {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let model = config.model;
        let op = assemble_divergence_form(&model, &grid, config.grid.bc)?;
        let v = grid.nodes.iter().map(|x| model.lyapunov_v(*x)).collect();
        Ok(Self {
            config: config.clone(),
            model,
            grid,
            op,
            v,
            dec: OnceLock::new(),
            probes: OnceLock::new(),
            nash: OnceLock::new(),
        })
    }

    pub fn decomposition(&self) -> Result<Arc<SpectralDecomposition>> {
        cached(&self.dec, || eigendecompose(&self.op))
    }

    pub fn probes(&self) -> Result<Arc<Vec<Probe>>> {
        cached(&self.probes, || {
            let dec = self.decomposition()?;
            Ok(probe_family(&dec, &self.grid, &self.v, self.config.seed))
        })
    }

    /// Classical Nash constant estimated on the probe family, then frozen.
    pub fn nash_constant(&self) -> Result<Arc<NashConstant>> {
        cached(&self.nash, || {
            let probes = self.probes()?;
            estimate_nash_constant(
                &self.op,
                &probes,
                self.model.lyapunov_constant(),
                &self.v,
                self.model.d,
            )
        })
    }
}

pub fn is_registered(name: &str) -> bool {
    SCENARIOS.contains(&name)
}

/// Runs one scenario against a shared workspace.
pub fn run_in(ws: &Workspace, name: &str) -> Result<VerificationReport> {
    if !is_registered(name) {
        return Err(Error::UnknownScenario(name.to_string()));
    }
    let out = scenarios::run(ws, name)?;
    Ok(VerificationReport::from_metrics(name, &ws.config, out.metrics, out.flags))
}

pub fn run_scenario(name: &str, config: &RunConfig) -> Result<VerificationReport> {
    if !is_registered(name) {
        return Err(Error::UnknownScenario(name.to_string()));
    }
    let ws = Workspace::new(config)?;
    run_in(&ws, name)
}

/// Every registered scenario, in registry order; a scenario that aborts
/// becomes a failed report carrying the error.
pub fn run_all(config: &RunConfig) -> Result<Vec<VerificationReport>> {
    let ws = Workspace::new(config)?;
    Ok(run_many(&ws, &SCENARIOS))
}

pub fn run_many(ws: &Workspace, names: &[&str]) -> Vec<VerificationReport> {
    names
        .par_iter()
        .map(|name| match run_in(ws, name) {
            Ok(r) => r,
            Err(e) => VerificationReport::from_error(name, &ws.config, &e),
        })
        .collect()
}

/// 0 when every report passes; otherwise the code of the first aborted
/// scenario, or 1 for a plain verification failure.
pub fn exit_code(reports: &[VerificationReport]) -> i32 {
    if let Some(code) = reports.iter().find_map(|r| r.error_code) {
        return code;
    }
    if reports.iter().all(|r| r.passed()) {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks() {
        assert!(Check::AtMost.holds(1.0, 1.0, 0.0));
        assert!(!Check::AtMost.holds(f64::NAN, 1.0, 0.0));
        assert!(Check::AtLeast.holds(-1e-9, 0.0, 1e-8));
        assert!(Check::Relative.holds(-0.9, -1.0, 0.15));
        assert!(!Check::Relative.holds(-0.12, -1.0, 0.15));
        assert!(Check::Info.holds(f64::NAN, f64::NAN, f64::NAN));
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let e = run_scenario("nonexistent", &RunConfig::defaults()).unwrap_err();
        assert!(matches!(e, Error::UnknownScenario(_)));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn exit_codes() {
        let cfg = RunConfig::defaults();
        let ok = VerificationReport::from_metrics("a", &cfg, vec![Metric::at_most("m", 0.0, 1.0)], vec![]);
        let bad = VerificationReport::from_metrics("b", &cfg, vec![Metric::at_most("m", 2.0, 1.0)], vec![]);
        let err = VerificationReport::from_error("c", &cfg, &Error::Quadrature("x".into()));
        assert_eq!(exit_code(std::slice::from_ref(&ok)), 0);
        assert_eq!(exit_code(&[ok.clone(), bad.clone()]), 1);
        assert_eq!(exit_code(&[bad, err]), 3);
    }
}
