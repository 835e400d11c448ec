//! Command-line front end. `run` takes the argument list and two sinks so the
//! binary stays a one-liner and tests can capture output.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::bound_checker::{
    c_alpha_estimate, fit_exponent, high_order_branch, resolution_degraded, BoundReport, Branch, InteriorKernel,
    EXPONENT_TOLERANCE,
};
use crate::discretization::BoundaryCondition;
use crate::error::{Error, Result};
use crate::measure_models::Family;
use crate::nash_verifier::{fractional_nash_terms, gamma_certificate, high_order_nash_terms, NashRate, GAP_TOLERANCE};
use crate::verification_suite::{self, format_f64, run_many, write_outputs, write_report_csv, Workspace, SCENARIOS};
use config::{parse_list, Overrides, RunConfig, RunConfigFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nkl", version, about = "Heat-kernel bound checks for fractional weighted Kolmogorov operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form model quantities at chosen points.
    ModelInspect {
        /// Comma-separated evaluation points.
        #[arg(long = "x", allow_hyphen_values = true)]
        x: Option<String>,
    },
    /// Nash-inequality gaps over the probe family.
    Nash,
    /// Kernel bound ratios over t_list and the fitted decay exponent.
    KernelBound,
    /// Resolvent-integral and subordination cross-checks.
    FractionalCheck,
    /// Every registered scenario; writes CSV and JSON into the output directory.
    VerifyAll {
        /// Run only these scenarios (repeatable).
        #[arg(long = "scenario")]
        scenario: Vec<String>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Density family: cauchy, exp-smooth, exp-power, gauss.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long = "a", global = true)]
    pub a: Option<f64>,
    #[arg(long = "d", global = true)]
    pub d: Option<u32>,
    #[arg(long = "K-cut", global = true)]
    pub k_cut: Option<f64>,
    /// Half-width of the grid box.
    #[arg(long = "L", global = true)]
    pub l: Option<f64>,
    #[arg(long = "n", global = true)]
    pub n: Option<usize>,
    /// neumann or dirichlet.
    #[arg(long, global = true)]
    pub bc: Option<String>,
    /// Comma-separated powers.
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// Comma-separated ascending times.
    #[arg(long = "t", global = true)]
    pub t: Option<String>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            family: self.model.as_deref().map(Family::parse).transpose().map_err(|e| Error::Config(format!("model: {e}")))?,
            beta: self.beta,
            a: self.a,
            d: self.d,
            k_cut: self.k_cut,
            l: self.l,
            n: self.n,
            bc: self.bc.as_deref().map(BoundaryCondition::parse).transpose()?,
            alpha_list: self.alpha.as_deref().map(|s| parse_list("alpha", s)).transpose()?,
            t_list: self.t.as_deref().map(|s| parse_list("t", s)).transpose()?,
            epsilon: self.epsilon,
            interior_margin: self.margin,
            output_dir: self.out.clone(),
            seed: self.seed,
        })
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfigFile::load(p)?,
            None => RunConfigFile::default(),
        };
        RunConfig::resolve(file, &self.overrides()?)
    }
}

/// Caps the global worker pool from `NKL_THREADS`.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("NKL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("NKL_THREADS: expected a positive integer, got `{raw}`")))?;
    // a pool that already exists (tests, repeated calls) is left as is
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    configure_threads()?;
    let cfg = cli.common.resolve()?;
    match &cli.command {
        Command::ModelInspect { x } => model_inspect(&cfg, x.as_deref(), out),
        Command::Nash => nash(&cfg, out, err),
        Command::KernelBound => kernel_bound(&cfg, out, err),
        Command::FractionalCheck => fractional_check(&cfg, out),
        Command::VerifyAll { scenario } => verify_all(&cfg, scenario, out, err),
    }
}

pub const DEFAULT_INSPECT_POINTS: [f64; 5] = [0.0, 1.0, 2.0, 5.0, 10.0];

fn model_inspect(cfg: &RunConfig, x: Option<&str>, out: &mut dyn Write) -> Result<i32> {
    let xs = match x {
        Some(s) => parse_list("x", s)?,
        None => DEFAULT_INSPECT_POINTS.to_vec(),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "rho", "grad_log_rho", "V", "minus_AV_over_V", "schrodinger_U"])?;
    for x in xs {
        let r = cfg.model.point_report(x)?;
        w.write_record(
            [r.x, r.rho, r.grad_log_rho, r.V, r.minus_AV_over_V, r.schrodinger_U]
                .iter()
                .map(|v| format_f64(*v)),
        )?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn nash(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let ws = Workspace::new(cfg)?;
    let dec = ws.decomposition()?;
    let probes = ws.probes()?;
    let nc = ws.nash_constant()?;
    let _ = writeln!(err, "nash constant {} (attained by {})", format_f64(nc.scale), nc.argmax);
    let rate = NashRate {
        d: ws.model.d,
        scale: nc.scale,
    };
    let c = ws.model.lyapunov_constant();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["probe_id", "alpha", "gamma", "lhs", "rhs", "gap"])?;
    let mut ok = true;
    for &alpha in &cfg.alpha_list {
        let cert = if alpha < 1.0 {
            Some(gamma_certificate(alpha, cfg.epsilon)?)
        } else {
            None
        };
        for p in probes.iter() {
            let terms = match &cert {
                Some(cert) => fractional_nash_terms(&dec, &p.values, alpha, cert, c, &rate, &ws.v)?,
                None => high_order_nash_terms(&dec, &p.values, alpha, c, &rate, &ws.v)?,
            };
            ok &= terms.relative_gap() >= -GAP_TOLERANCE;
            let gamma = cert.map_or(String::new(), |c| format_f64(c.gamma));
            w.write_record([
                p.id.clone(),
                format_f64(alpha),
                gamma,
                format_f64(terms.lhs),
                format_f64(terms.rhs),
                format_f64(terms.gap()),
            ])?;
        }
    }
    w.flush()?;
    Ok(if ok { EXIT_OK } else { EXIT_VERIFICATION })
}

#[derive(Debug, Serialize)]
struct KernelBoundSummary<'a> {
    config_digest: String,
    reports: &'a [BoundReport],
}

fn kernel_bound(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let ws = Workspace::new(cfg)?;
    let dec = ws.decomposition()?;
    let c = ws.model.lyapunov_constant();
    let d = ws.model.d as f64;
    let margin = cfg.interior_margin;
    let mut reports = Vec::new();
    for &alpha in &cfg.alpha_list {
        let (branch, rate) = if alpha >= 1.0 {
            high_order_branch(alpha, c, c_alpha_estimate(&dec, &ws.v, alpha)?)
        } else {
            (Branch::PowerOfC, c.powf(alpha))
        };
        let sups = cfg
            .t_list
            .par_iter()
            .map(|&t| {
                let k = InteriorKernel::new(&dec, &ws.grid, t, alpha, margin)?;
                Ok(k.sup_ratio(&ws.grid, &ws.v, margin, (-rate * t).exp())?.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        let fit = if cfg.t_list.len() >= 5 {
            Some(fit_exponent(&cfg.t_list, &sups)?)
        } else {
            let _ = writeln!(err, "alpha {alpha}: fewer than 5 times, no exponent fit");
            None
        };
        let degraded = resolution_degraded(ws.grid.h, cfg.t_list[0], alpha);
        if degraded {
            let _ = writeln!(err, "alpha {alpha}: kernel width below two grid steps at t = {}", cfg.t_list[0]);
        }
        reports.push(BoundReport {
            alpha,
            t_values: cfg.t_list.clone(),
            sup_ratio: sups,
            bound_branch: vec![branch; cfg.t_list.len()],
            fitted_exponent: fit.map_or(f64::NAN, |f| f.slope),
            reference_exponent: -d / (2.0 * alpha),
            c_fit: fit.map_or(f64::NAN, |f| f.c_fit),
            degraded,
        });
    }

    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "alpha", "t", "sup_ratio", "bound_branch", "slope", "C_fit", "reference_exponent"])?;
    let mut ok = true;
    for r in &reports {
        for (k, t) in r.t_values.iter().enumerate() {
            ok &= r.sup_ratio[k].is_finite() && r.sup_ratio[k] > 0.0;
            w.write_record([
                "point".to_string(),
                format_f64(r.alpha),
                format_f64(*t),
                format_f64(r.sup_ratio[k]),
                r.bound_branch[k].name().to_string(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        if r.fitted_exponent.is_finite() {
            ok &= r.within_tolerance();
            w.write_record([
                "fit".to_string(),
                format_f64(r.alpha),
                String::new(),
                String::new(),
                String::new(),
                format_f64(r.fitted_exponent),
                format_f64(r.c_fit),
                format_f64(r.reference_exponent),
            ])?;
        }
    }
    w.flush()?;
    drop(w);

    std::fs::create_dir_all(&cfg.output_dir)?;
    let summary = KernelBoundSummary {
        config_digest: cfg.digest(),
        reports: &reports,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(cfg.output_dir.join("kernel_bound.json"), text)?;
    if !ok {
        let _ = writeln!(
            err,
            "fitted exponent outside {}% of -d/(2 alpha) or non-positive ratio",
            EXPONENT_TOLERANCE * 100.0
        );
    }
    Ok(if ok { EXIT_OK } else { EXIT_VERIFICATION })
}

fn fractional_check(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let ws = Workspace::new(cfg)?;
    let mut code = EXIT_OK;
    let mut buf = Vec::new();
    for (k, name) in ["balakrishnan", "subordination"].iter().enumerate() {
        let report = verification_suite::run_in(&ws, name)?;
        if !report.passed() {
            code = EXIT_VERIFICATION;
        }
        let mut part = Vec::new();
        write_report_csv(&report, &mut part)?;
        // one header for the combined table
        let text = String::from_utf8(part).expect("csv is utf-8");
        let body = if k == 0 { text.as_str() } else { text.split_once('\n').map_or("", |(_, b)| b) };
        buf.extend_from_slice(body.as_bytes());
    }
    out.write_all(&buf)?;
    Ok(code)
}

fn verify_all(cfg: &RunConfig, only: &[String], out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    for name in only {
        if !verification_suite::is_registered(name) {
            return Err(Error::UnknownScenario(name.clone()));
        }
    }
    let names: Vec<&str> = if only.is_empty() {
        SCENARIOS.to_vec()
    } else {
        SCENARIOS.iter().copied().filter(|s| only.iter().any(|o| o == s)).collect()
    };
    let ws = Workspace::new(cfg)?;
    let reports = run_many(&ws, &names);
    write_outputs(&cfg.output_dir, cfg, &reports)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "status", "metrics", "failed_metrics", "error"])?;
    for r in &reports {
        let failed: Vec<&str> = r.metrics.iter().filter(|m| !m.pass).map(|m| m.name.as_str()).collect();
        w.write_record([
            r.scenario.clone(),
            if r.passed() { "pass" } else { "fail" }.to_string(),
            r.metrics.len().to_string(),
            failed.join(";"),
            r.error.clone().unwrap_or_default(),
        ])?;
        if let Some(e) = &r.error {
            let _ = writeln!(err, "{}: {e}", r.scenario);
        }
    }
    w.flush()?;
    Ok(verification_suite::exit_code(&reports))
}
