//! Acceptance criteria 1-10. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails.

use std::time::Instant;

use ndarray::Array2;
use nkl::bound_checker::{c_alpha_estimate, fit_exponent, high_order_branch, InteriorKernel};
use nkl::cli::config::{log_spaced, RunConfig};
use nkl::discretization::{assemble_divergence_form, build_grid, BoundaryCondition, DiscreteOperator};
use nkl::fractional_calculus::{balakrishnan_rule, balakrishnan_scalar, identity_grid, subordinate_semigroup, subordination_measure};
use nkl::measure_models::DensityModel;
use nkl::nash_verifier::{fractional_nash_terms, gamma_certificate, high_order_nash_terms, shifted_power_check, NashRate};
use nkl::spectral_engine::{eigendecompose, matrix_exponential_oracle, SpectralDecomposition};
use nkl::verification_suite::{exit_code, run_all, write_outputs, Workspace};

const SHIFTED_POWER_SLACK: f64 = 1e-12;
const BALAKRISHNAN_REL: f64 = 1e-8;
const LAPLACE_ABS: f64 = 1e-6;
const SUBORDINATION_MU: f64 = 1e-6;
const EXPM_FROBENIUS: f64 = 1e-8;
const KERNEL_NEGATIVITY: f64 = -1e-10;
const MASS_ABS: f64 = 1e-8;
const SEMIGROUP_REL: f64 = 1e-8;
const LYAPUNOV_SLACK: f64 = 1e-12;
const GAP_REL: f64 = 1e-8;
const EXPONENT_REL: f64 = 0.15;
const MONOTONE_FACTOR: f64 = 1.02;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn smooth_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed | 1;
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    (0..n)
        .map(|i| 0.25 * raw[i.saturating_sub(1)] + 0.5 * raw[i] + 0.25 * raw[(i + 1).min(n - 1)])
        .collect()
}

fn mu_normalized(op: &DiscreteOperator, f: Vec<f64>) -> Vec<f64> {
    let n = op.norm2(&f).unwrap().sqrt();
    f.into_iter().map(|a| a / n).collect()
}

fn small_problem() -> (DiscreteOperator, SpectralDecomposition) {
    let model = DensityModel::cauchy(2.0, 1).unwrap();
    let grid = build_grid(8.0, 200).unwrap();
    let op = assemble_divergence_form(&model, &grid, BoundaryCondition::Neumann).unwrap();
    let dec = eigendecompose(&op).unwrap();
    (op, dec)
}

fn shifted_power_grid() -> Verdict {
    let start = Instant::now();
    let mut lambdas = vec![0.0];
    lambdas.extend(log_spaced(1e-3, 1e6, 39));
    let mut checks = 0;
    let mut violations = 0;
    for &l in &lambdas {
        for c in [0.0, 0.5, 3.0, 100.0] {
            for a in [0.1, 0.5, 0.9, 1.0, 1.5, 3.0] {
                let r = shifted_power_check(l, c, a);
                checks += 1;
                if r.lhs > r.rhs + SHIFTED_POWER_SLACK {
                    violations += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        checks == 960 && violations == 0 && secs < 1.0,
        format!("{checks} checks, {violations} violations, {secs:.3}s"),
    )
}

fn balakrishnan_identity() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let rule = balakrishnan_rule(alpha, 1e-4, 1e6).unwrap();
        for lambda in log_spaced(1e-4, 1e6, 30) {
            let q = balakrishnan_scalar(lambda, alpha, &rule).unwrap();
            let exact = lambda.powf(alpha);
            worst = worst.max((q - exact).abs() / exact);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= BALAKRISHNAN_REL && secs < 5.0,
        format!("max relative error {worst:e}, {secs:.3}s"),
    )
}

fn subordination_identity() -> Verdict {
    let (op, dec) = small_problem();
    let f = mu_normalized(&op, smooth_vector(op.n(), 7));
    let mut laplace = 0.0f64;
    let mut operator = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        for alpha in [0.5, 0.7] {
            let m = subordination_measure(t, alpha).unwrap();
            for lambda in identity_grid() {
                laplace = laplace.max((m.laplace(lambda) - (-t * lambda.powf(alpha)).exp()).abs());
            }
            let via_measure = subordinate_semigroup(&dec, &m, &f).unwrap();
            let via_kernel = dec.kernel(t, alpha).unwrap().apply(&op.weights, &f).unwrap();
            let diff: Vec<f64> = via_measure.iter().zip(&via_kernel).map(|(a, b)| a - b).collect();
            operator = operator.max(op.norm2(&diff).unwrap().sqrt());
        }
    }
    verdict(
        laplace <= LAPLACE_ABS && operator <= SUBORDINATION_MU,
        format!("Laplace identity {laplace:e}, operator route {operator:e} (n = 200)"),
    )
}

fn frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let model = DensityModel::cauchy(2.0, 1).unwrap();
    let mut worst = 0.0f64;
    for n in [50, 200] {
        let grid = build_grid(8.0, n).unwrap();
        let op = assemble_divergence_form(&model, &grid, BoundaryCondition::Neumann).unwrap();
        let dec = eigendecompose(&op).unwrap();
        for t in [0.1, 1.0] {
            let spectral = dec.symmetric_function_matrix(|l| (-t * l).exp()).unwrap();
            let oracle = matrix_exponential_oracle(&op, t).unwrap();
            worst = worst.max(frobenius(&spectral, &oracle));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= EXPM_FROBENIUS && secs < 20.0,
        format!("max Frobenius distance {worst:e}, {secs:.3}s"),
    )
}

fn markov_structure() -> Verdict {
    let (op, dec) = small_problem();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0, 1.5] {
        let mut min_entry = f64::INFINITY;
        let mut mass = 0.0f64;
        for t in [0.01, 0.1, 1.0] {
            let k = dec.kernel(t, alpha).unwrap();
            min_entry = min_entry.min(k.min_entry());
            for m in k.row_masses(&op.weights).unwrap() {
                mass = mass.max((m - 1.0).abs());
            }
        }
        let mut semigroup = 0.0f64;
        for (t, s) in [(0.1, 0.2), (0.5, 0.5)] {
            let kt = dec.kernel(t, alpha).unwrap().values;
            let ks = dec.kernel(s, alpha).unwrap().values;
            let kts = dec.kernel(t + s, alpha).unwrap().values;
            let w = Array2::from_diag(&ndarray::Array1::from(op.weights.clone()));
            let composed = kt.dot(&w).dot(&ks);
            let scale = kts.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = composed.iter().zip(kts.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            semigroup = semigroup.max(err / scale);
        }
        let ok = min_entry >= KERNEL_NEGATIVITY && mass <= MASS_ABS && semigroup <= SEMIGROUP_REL;
        pass &= ok;
        parts.push(format!(
            "alpha={alpha}: min entry {min_entry:e}, mass {mass:e}, semigroup {semigroup:e}{}",
            if ok { "" } else { " [fails]" }
        ));
    }
    verdict(pass, parts.join("; "))
}

fn lyapunov_constants() -> Verdict {
    let grid = build_grid(40.0, 4001).unwrap();
    let mut cases: Vec<(String, DensityModel, f64, f64)> = Vec::new();
    for beta in [1.5, 2.0, 3.0] {
        cases.push((format!("cauchy beta={beta}"), DensityModel::cauchy(beta, 1).unwrap(), beta, 4.0 * beta));
    }
    for a in [0.5, 1.0, 1.5] {
        cases.push((format!("exp-smooth a={a}"), DensityModel::exp_smooth(a, 1).unwrap(), 0.5 * a, a * (2.0 - a)));
    }
    for a in [2.0f64, 3.0] {
        let d = 1.0;
        let k = (2.0 * (a + d - 2.0) / a).powf(1.0 / a);
        let c = 0.5 * a * (a + d - 2.0) * k.powf(a - 2.0);
        cases.push((format!("exp-power a={a}"), DensityModel::exp_power(a, 1, Some(k)).unwrap(), c, 0.0));
    }
    let mut pass = true;
    let mut worst = (f64::NEG_INFINITY, String::new());
    for (name, model, c_closed, hessian) in &cases {
        for &x in &grid.nodes {
            let excess = model.minus_av_over_v(x) - c_closed;
            let hess = model.log_rho_second(x) - hessian;
            pass &= excess <= LYAPUNOV_SLACK && hess <= LYAPUNOV_SLACK;
            if excess.max(hess) > worst.0 {
                worst = (excess.max(hess), format!("{name} x={x}"));
            }
        }
    }
    verdict(
        pass,
        format!("{} models, worst excess over the constant or Hessian bound {:e} ({})", cases.len(), worst.0, worst.1),
    )
}

fn nash_gaps(ws: &Workspace) -> Verdict {
    let start = Instant::now();
    let dec = ws.decomposition().unwrap();
    let probes = ws.probes().unwrap();
    let nc = ws.nash_constant().unwrap();
    let rate = NashRate {
        d: ws.model.d,
        scale: nc.scale,
    };
    let c = ws.model.lyapunov_constant();
    let mut worst = (f64::INFINITY, String::new());
    for alpha in [0.25, 0.5, 0.75, 1.5, 2.0] {
        let cert = (alpha < 1.0).then(|| gamma_certificate(alpha, 0.5).unwrap());
        for p in probes.iter() {
            let terms = match &cert {
                Some(cert) => fractional_nash_terms(&dec, &p.values, alpha, cert, c, &rate, &ws.v).unwrap(),
                None => high_order_nash_terms(&dec, &p.values, alpha, c, &rate, &ws.v).unwrap(),
            };
            if terms.relative_gap() < worst.0 {
                worst = (terms.relative_gap(), format!("alpha={alpha} probe={}", p.id));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        probes.len() == 64 && worst.0 >= -GAP_REL && secs < 60.0,
        format!("{} probes, min gap/|f|^2 {:e} at {}, {secs:.1}s", probes.len(), worst.0, worst.1),
    )
}

fn kernel_exponent(ws: &Workspace) -> Verdict {
    let start = Instant::now();
    let dec = ws.decomposition().unwrap();
    let ts = log_spaced(1e-3, 1e-2, 6);
    let margin = ws.config.interior_margin;
    let c = ws.model.lyapunov_constant();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 0.75, 1.0] {
        let mut sup = Vec::new();
        let mut schr = Vec::new();
        for &t in &ts {
            let k = InteriorKernel::new(&dec, &ws.grid, t, alpha, margin).unwrap();
            let scale = (-c.powf(alpha) * t).exp();
            sup.push(k.sup_ratio(&ws.grid, &ws.v, margin, scale).unwrap().value);
            schr.push(k.schrodinger_sup(&ws.model, &ws.grid, margin, scale).unwrap().value);
        }
        let reference = -1.0 / (2.0 * alpha);
        let s1 = fit_exponent(&ts, &sup).unwrap().slope;
        let s2 = fit_exponent(&ts, &schr).unwrap().slope;
        let ok = (s1 - reference).abs() <= EXPONENT_REL * reference.abs()
            && (s2 - reference).abs() <= EXPONENT_REL * reference.abs();
        pass &= ok;
        parts.push(format!(
            "alpha={alpha}: slope {s1:.4} / {s2:.4} vs {reference:.4}{}",
            if ok { "" } else { " [fails]" }
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    verdict(pass, format!("{}; {secs:.1}s", parts.join("; ")))
}

fn high_order_branch_monotone(ws: &Workspace) -> Verdict {
    let dec = ws.decomposition().unwrap();
    let ts = log_spaced(1e-2, 1.0, 10);
    let margin = ws.config.interior_margin;
    let c = ws.model.lyapunov_constant();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [1.0, 1.5, 2.0] {
        let c_alpha = c_alpha_estimate(&dec, &ws.v, alpha).unwrap();
        let (branch, rate) = high_order_branch(alpha, c, c_alpha);
        let mut logs = Vec::new();
        let mut finite = true;
        for &t in &ts {
            let k = InteriorKernel::new(&dec, &ws.grid, t, alpha, margin).unwrap();
            let s = k.sup_ratio(&ws.grid, &ws.v, margin, 1.0).unwrap().value;
            finite &= s.is_finite() && s > 0.0;
            logs.push(s.ln() - rate * t);
        }
        let worst = logs.windows(2).map(|w| (w[1] - w[0]).exp()).fold(f64::NEG_INFINITY, f64::max);
        let ok = finite && worst <= MONOTONE_FACTOR;
        pass &= ok;
        parts.push(format!("alpha={alpha} ({}): worst step {worst:.4}", branch.name()));
    }
    verdict(pass, parts.join("; "))
}

fn determinism() -> Verdict {
    let config = RunConfig::defaults();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_all(&config).unwrap();
    write_outputs(a.path(), &config, &first).unwrap();
    let second = run_all(&config).unwrap();
    write_outputs(b.path(), &config, &second).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut identical = names.len() == 14;
    for name in &names {
        identical &= std::fs::read(a.path().join(name)).unwrap() == std::fs::read(b.path().join(name)).unwrap();
    }
    let code = exit_code(&first);
    let failed: Vec<&str> = first.iter().filter(|r| !r.passed()).map(|r| r.scenario.as_str()).collect();
    verdict(
        identical && code == 0,
        format!(
            "{} files byte-identical: {identical}; exit code {code}; failing scenarios: [{}]",
            names.len(),
            failed.join(", ")
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let ws = Workspace::new(&RunConfig::defaults()).unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("shifted-power scalar inequality", Box::new(shifted_power_grid)),
        ("resolvent-integral scalar identity", Box::new(balakrishnan_identity)),
        ("subordination Laplace identity and operator route", Box::new(subordination_identity)),
        ("spectral exponential vs independent oracle", Box::new(oracle_equivalence)),
        ("Markov structure of fractional kernels", Box::new(markov_structure)),
        ("Lyapunov constants and Hessian bounds", Box::new(lyapunov_constants)),
        ("fractional and high-order Nash gaps", Box::new(|| nash_gaps(&ws))),
        ("kernel-bound decay exponent", Box::new(|| kernel_exponent(&ws))),
        ("alpha >= 1 bound branch monotone", Box::new(|| high_order_branch_monotone(&ws))),
        ("determinism and exit code", Box::new(determinism)),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        println!("criterion {:>2} {} {name}: {}", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
