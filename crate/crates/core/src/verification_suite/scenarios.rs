use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{format_f64, Metric, Outcome, Workspace, DEGRADED_FLAG};
use crate::bound_checker::{
    c_alpha_estimate, c_alpha_estimate_on, fit_exponent, high_order_branch, resolution_degraded, InteriorKernel, EXPONENT_TOLERANCE,
    MONOTONE_FACTOR,
};
use crate::cli::config::log_spaced;
use crate::discretization::{
    assemble_divergence_form, assemble_schrodinger, build_grid, BoundaryCondition, DiscreteOperator, Grid1D,
};
use crate::error::{Error, Result};
use crate::fractional_calculus::{
    balakrishnan_apply, balakrishnan_apply_shifted, balakrishnan_rule, balakrishnan_scalar, operator_rule,
    subordinate_semigroup, subordination_measure,
};
use crate::measure_models::{DensityModel, Family, FlatDensity};
use crate::nash_verifier::{
    fractional_nash_terms, gamma_certificate, gamma_sequences, high_order_nash_terms, jensen_check, nash_terms,
    shifted_power_check, NashRate, GAP_TOLERANCE, SCALAR_SLACK,
};
use crate::spectral_engine::{eigendecompose, eigenvalue_by_index, fractional_power, SpectralDecomposition};

pub(super) fn run(ws: &Workspace, name: &str) -> Result<Outcome> {
    match name {
        "shifted-power-comparison" => shifted_power_comparison(),
        "jensen-convexity" => jensen_convexity(ws),
        "gamma-recursion" => gamma_recursion(ws),
        "fractional-nash-gap" => fractional_nash_gap(ws),
        "high-order-nash-gap" => high_order_nash_gap(ws),
        "balakrishnan" => balakrishnan(ws),
        "subordination" => subordination(ws),
        "kernel-bound" => kernel_bound(ws),
        "kernel-bound-high-order" => kernel_bound_high_order(ws),
        "kernel-exponent" => kernel_exponent(ws),
        "lyapunov-cauchy" => lyapunov_cauchy(ws),
        "lyapunov-exponential" => lyapunov_exponential(ws),
        "schrodinger-equivalence" => schrodinger_equivalence(ws),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

// per-scenario salts keep the random streams independent of run order
const SALT_JENSEN: u64 = 0x6a65_6e73_656e;
const SALT_BALAKRISHNAN: u64 = 0x6261_6c61_6b72;
const SALT_SUBORDINATION: u64 = 0x7375_626f_7264;

pub const SMALL_N: usize = 200;
pub const SMALL_L: f64 = 8.0;

fn rng(ws: &Workspace, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(ws.config.seed ^ salt)
}

/// Uniform `[-1, 1]` entries smoothed twice with `[1, 2, 1]/4`.
fn smooth_random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    for _ in 0..2 {
        let g = f.clone();
        for i in 0..n {
            let l = g[i.saturating_sub(1)];
            let r = g[(i + 1).min(n - 1)];
            f[i] = 0.25 * (l + 2.0 * g[i] + r);
        }
    }
    f
}

fn mu_norm(weights: &[f64], f: &[f64]) -> f64 {
    f.iter().zip(weights).map(|(a, w)| a * a * w).sum::<f64>().sqrt()
}

fn mu_distance(weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .zip(weights)
        .map(|((a, b), w)| (a - b) * (a - b) * w)
        .sum::<f64>()
        .sqrt()
}

fn normalized(weights: &[f64], mut f: Vec<f64>) -> Vec<f64> {
    let s = mu_norm(weights, &f);
    for v in f.iter_mut() {
        *v /= s;
    }
    f
}

/// Sorted union of `fixed` and the configured alphas accepted by `keep`.
fn alpha_set(fixed: &[f64], config: &[f64], keep: impl Fn(f64) -> bool) -> Vec<f64> {
    let mut out: Vec<f64> = fixed.iter().chain(config).copied().filter(|a| keep(*a)).collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn label(alpha: f64) -> String {
    format!("alpha={alpha}")
}

/// Neumann operator of the configured model on a short coarse grid.
fn small_problem(ws: &Workspace) -> Result<(Grid1D, DiscreteOperator, SpectralDecomposition)> {
    let grid = build_grid(ws.grid.l.min(SMALL_L), SMALL_N)?;
    let op = assemble_divergence_form(&ws.model, &grid, BoundaryCondition::Neumann)?;
    let dec = eigendecompose(&op)?;
    Ok((grid, op, dec))
}

fn shifted_power_comparison() -> Result<Outcome> {
    let mut lambdas = vec![0.0];
    lambdas.extend(log_spaced(1e-3, 1e6, 39));
    let cs = [0.0, 0.5, 3.0, 100.0];
    let alphas = [0.1, 0.5, 0.9, 1.0, 1.5, 3.0];
    let mut checks = 0usize;
    let mut violations = 0usize;
    let mut worst = (f64::NEG_INFINITY, String::new());
    for &l in &lambdas {
        for &c in &cs {
            for &a in &alphas {
                let r = shifted_power_check(l, c, a);
                checks += 1;
                if !r.ok {
                    violations += 1;
                }
                // relative so the large-lambda end is comparable
                let excess = (r.lhs - r.rhs) / r.rhs.abs().max(1.0);
                if excess > worst.0 {
                    worst = (excess, format!("lambda={l} c={c} alpha={a}"));
                }
            }
        }
    }
    Ok(Outcome::new(vec![
        Metric::info("checks", checks as f64),
        Metric::at_most("violations", violations as f64, 0.0),
        Metric::at_most("max_relative_excess", worst.0, SCALAR_SLACK).with_detail(worst.1),
    ]))
}

fn jensen_convexity(ws: &Workspace) -> Result<Outcome> {
    let dec = ws.decomposition()?;
    let lmax = dec.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut rng = rng(ws, SALT_JENSEN);
    let n = dec.n();
    let phis: [(&str, Box<dyn Fn(f64) -> f64>); 3] = [
        ("t^1.5", Box::new(|t: f64| t.max(0.0).powf(1.5))),
        ("t^2", Box::new(|t: f64| t * t)),
        ("exp(t/lambda_max)", Box::new(move |t: f64| (t / lmax).exp())),
    ];
    let mut violations = 0usize;
    let mut worst_margin = (f64::INFINITY, String::new());
    let mut worst_var = (0.0f64, String::new());
    for k in 0..200 {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let f = normalized(&dec.weights, raw);
        for (name, phi) in &phis {
            let r = jensen_check(&dec, &f, phi)?;
            if !r.ok {
                violations += 1;
            }
            let margin = (r.rhs - r.lhs) / r.rhs.abs().max(1.0);
            if margin < worst_margin.0 {
                worst_margin = (margin, format!("vector={k} phi={name}"));
            }
            if *name == "t^2" {
                // spectral variance against || (A_h - m) f ||^2 from the stencil
                let mean = r.lhs.sqrt();
                let af = ws.op.apply(&f)?;
                let centred: Vec<f64> = af.iter().zip(&f).map(|(a, b)| a - mean * b).collect();
                let direct = mu_norm(&dec.weights, &centred).powi(2);
                let err = ((r.rhs - r.lhs) - direct).abs() / direct;
                if err > worst_var.0 {
                    worst_var = (err, format!("vector={k}"));
                }
            }
        }
    }
    Ok(Outcome::new(vec![
        Metric::info("checks", (200 * phis.len()) as f64),
        Metric::at_most("violations", violations as f64, 0.0),
        Metric::info("min_relative_margin", worst_margin.0).with_detail(worst_margin.1),
        Metric::at_most("variance_identity_rel_err", worst_var.0, 1e-8).with_detail(worst_var.1),
    ]))
}

fn gamma_recursion(ws: &Workspace) -> Result<Outcome> {
    let eps = ws.config.epsilon;
    let len = 16;
    let (a, b) = gamma_sequences(eps, len);
    let b_err = b
        .iter()
        .enumerate()
        .map(|(k, bk)| (bk - eps.powi(k as i32 + 1)).abs() / eps.powi(k as i32 + 1))
        .fold(0.0, f64::max);
    let a_bad = a.windows(2).filter(|w| !(w[1] < w[0])).count();
    let mut m = vec![
        Metric::at_most("b_equals_epsilon_power_rel_err", b_err, 1e-14).with_detail(format!("epsilon={eps} steps={len}")),
        Metric::at_most("a_not_decreasing_steps", a_bad as f64, 0.0).with_detail(format!("epsilon={eps}")),
    ];

    let half = gamma_certificate(0.5, 0.5)?;
    m.push(Metric::new("gamma(alpha=0.5,eps=0.5)", half.gamma, super::Check::Near, 0.5, 1e-15));
    m.push(Metric::new("steps(alpha=0.5,eps=0.5)", half.n_steps as f64, super::Check::Near, 1.0, 0.0));
    let high = gamma_certificate(0.9, 0.5)?;
    m.push(Metric::new("gamma(alpha=0.9,eps=0.5)", high.gamma, super::Check::Near, 0.5, 1e-15));
    let low = gamma_certificate(0.2, 0.5)?;
    m.push(Metric::new("steps(alpha=0.2,eps=0.5)", low.n_steps as f64, super::Check::Near, 3.0, 0.0));
    m.push(Metric::new("b_n(alpha=0.2,eps=0.5)", low.b_n, super::Check::Near, 0.125, 1e-15));
    let expect = low.a_n.powf(0.2 / 0.125).min(0.125);
    m.push(Metric::new("gamma(alpha=0.2,eps=0.5)", low.gamma, super::Check::Near, expect, 1e-15));

    for e in [0.25, 0.5, 0.75] {
        for al in [0.25, 0.5, 0.75] {
            let c = gamma_certificate(al, e)?;
            m.push(Metric::info(format!("gamma(alpha={al},eps={e})"), c.gamma).with_detail(format!("n={}", c.n_steps)));
        }
    }
    Ok(Outcome::new(m))
}

fn fractional_nash_gap(ws: &Workspace) -> Result<Outcome> {
    let dec = ws.decomposition()?;
    let probes = ws.probes()?;
    let nc = ws.nash_constant()?;
    let rate = NashRate {
        d: ws.model.d,
        scale: nc.scale,
    };
    let c = ws.model.lyapunov_constant();
    let mut m = vec![Metric::info("nash_constant", nc.scale).with_detail(format!("argmax={}", nc.argmax))];

    let mut worst = (f64::INFINITY, String::new());
    for p in probes.iter() {
        let g = nash_terms(&ws.op, &p.values, c, &rate, &ws.v)?.relative_gap();
        if g < worst.0 {
            worst = (g, p.id.clone());
        }
    }
    m.push(Metric::at_least("classical/min_relative_gap", worst.0, -GAP_TOLERANCE).with_detail(worst.1));

    let alphas = alpha_set(&[0.25, 0.5, 0.75], &ws.config.alpha_list, |a| a > 0.0 && a < 1.0);
    for alpha in alphas {
        let cert = gamma_certificate(alpha, ws.config.epsilon)?;
        let mut worst = (f64::INFINITY, String::new());
        let mut transfer_bad = 0usize;
        for p in probes.iter() {
            let g = fractional_nash_terms(&dec, &p.values, alpha, &cert, c, &rate, &ws.v)?.relative_gap();
            if g < worst.0 {
                worst = (g, p.id.clone());
            }
            // a larger gamma can only shrink the gap
            let mut prev = g;
            for factor in [1.25, 1.5, 2.0] {
                let mut bigger = cert;
                bigger.gamma = (cert.gamma * factor).min(1.0);
                let gb = fractional_nash_terms(&dec, &p.values, alpha, &bigger, c, &rate, &ws.v)?.relative_gap();
                if gb > prev + 1e-12 * prev.abs().max(1.0) {
                    transfer_bad += 1;
                }
                prev = gb;
            }
        }
        let l = label(alpha);
        m.push(Metric::info(format!("{l}/gamma"), cert.gamma).with_detail(format!("n={} eps={}", cert.n_steps, cert.epsilon)));
        m.push(Metric::at_least(format!("{l}/min_relative_gap"), worst.0, -GAP_TOLERANCE).with_detail(worst.1));
        m.push(Metric::at_most(format!("{l}/gamma_monotonicity_violations"), transfer_bad as f64, 0.0));
    }
    Ok(Outcome::new(m))
}

fn high_order_nash_gap(ws: &Workspace) -> Result<Outcome> {
    let dec = ws.decomposition()?;
    let probes = ws.probes()?;
    let nc = ws.nash_constant()?;
    let rate = NashRate {
        d: ws.model.d,
        scale: nc.scale,
    };
    let c = ws.model.lyapunov_constant();
    let mut m = vec![Metric::info("nash_constant", nc.scale).with_detail(format!("argmax={}", nc.argmax))];

    let mut reduction = (0.0f64, String::new());
    for p in probes.iter() {
        let one = high_order_nash_terms(&dec, &p.values, 1.0, c, &rate, &ws.v)?;
        let classical = nash_terms(&ws.op, &p.values, c, &rate, &ws.v)?;
        let diff = (one.gap() - classical.gap()).abs() / classical.norm2;
        if diff > reduction.0 {
            reduction = (diff, p.id.clone());
        }
    }
    m.push(Metric::at_most("alpha=1/reduction_to_classical", reduction.0, 1e-8).with_detail(reduction.1));

    for alpha in alpha_set(&[1.0, 1.5, 2.0], &ws.config.alpha_list, |a| a >= 1.0) {
        let mut worst = (f64::INFINITY, String::new());
        for p in probes.iter() {
            let g = high_order_nash_terms(&dec, &p.values, alpha, c, &rate, &ws.v)?.relative_gap();
            if g < worst.0 {
                worst = (g, p.id.clone());
            }
        }
        m.push(Metric::at_least(format!("{}/min_relative_gap", label(alpha)), worst.0, -GAP_TOLERANCE).with_detail(worst.1));
    }
    Ok(Outcome::new(m))
}

fn balakrishnan(ws: &Workspace) -> Result<Outcome> {
    let mut m = Vec::new();

    let lambdas = log_spaced(1e-4, 1e6, 30);
    let mut worst = (0.0f64, String::new());
    for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let rule = balakrishnan_rule(alpha, 1e-4, 1e6)?;
        for &l in &lambdas {
            let want = l.powf(alpha);
            let err = (balakrishnan_scalar(l, alpha, &rule)? - want).abs() / want;
            if err > worst.0 {
                worst = (err, format!("lambda={l} alpha={alpha}"));
            }
        }
    }
    m.push(Metric::at_most("scalar_max_rel_err", worst.0, 1e-8).with_detail(worst.1));

    let (_, op, dec) = small_problem(ws)?;
    let w = &dec.weights;
    let mut rng = rng(ws, SALT_BALAKRISHNAN);
    let f = smooth_random(&mut rng, op.n());
    let mut op_err = (0.0f64, String::new());
    let mut qf_err = (0.0f64, String::new());
    let mut const_img = (0.0f64, String::new());
    let ones = vec![1.0; op.n()];
    for alpha in [0.3, 0.5, 0.7] {
        let rule = operator_rule(&op, alpha)?;
        let quad = balakrishnan_apply(&op, &f, alpha, &rule)?;
        let spec = dec.apply_function(|l| fractional_power(l, alpha), &f)?;
        let e = mu_distance(w, &quad, &spec) / mu_norm(w, &spec);
        if e > op_err.0 {
            op_err = (e, label(alpha));
        }
        let q1: f64 = quad.iter().zip(&f).zip(w).map(|((a, b), c)| a * b * c).sum();
        let q2 = dec.quadratic_form(|l| fractional_power(l, alpha), &f)?;
        let e = (q1 - q2).abs() / q2.abs();
        if e > qf_err.0 {
            qf_err = (e, label(alpha));
        }
        let img = balakrishnan_apply(&op, &ones, alpha, &rule)?;
        let e = img.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if e > const_img.0 {
            const_img = (e, label(alpha));
        }
    }
    m.push(Metric::at_most("operator_vs_spectral_rel_err", op_err.0, 1e-6).with_detail(op_err.1));
    m.push(Metric::at_most("quadratic_form_rel_err", qf_err.0, 1e-6).with_detail(qf_err.1));
    m.push(Metric::at_most("constant_image_max", const_img.0, 1e-8).with_detail(const_img.1));

    // A^0.3 A^0.4 = A^0.7
    let r3 = operator_rule(&op, 0.3)?;
    let r4 = operator_rule(&op, 0.4)?;
    let r7 = operator_rule(&op, 0.7)?;
    let two = balakrishnan_apply(&op, &balakrishnan_apply(&op, &f, 0.4, &r4)?, 0.3, &r3)?;
    let one = balakrishnan_apply(&op, &f, 0.7, &r7)?;
    m.push(Metric::at_most("composition_rel_err", mu_distance(w, &two, &one) / mu_norm(w, &one), 2e-6).with_detail("0.3+0.4"));

    // (A_h + c) V >= 0 with the discrete constant, so (A_h + c)^alpha V >= 0
    let v: Vec<f64> = op.grid.nodes.iter().map(|x| ws.model.lyapunov_v(*x)).collect();
    let av = op.apply(&v)?;
    let c_h = av
        .iter()
        .zip(&v)
        .map(|(a, b)| -a / b)
        .fold(ws.model.lyapunov_constant(), f64::max);
    m.push(Metric::info("discrete_lyapunov_constant", c_h));
    let mut min_entry = (f64::INFINITY, String::new());
    for alpha in [0.3, 0.5, 0.7] {
        let rule = balakrishnan_rule(alpha, c_h.max(1e-8), op.spectral_bound().max(1.0) + c_h)?;
        let out = balakrishnan_apply_shifted(&op, c_h, &v, alpha, &rule)?;
        for (i, x) in out.iter().enumerate() {
            if *x < min_entry.0 {
                min_entry = (*x, format!("{} index={i}", label(alpha)));
            }
        }
    }
    m.push(Metric::at_least("shifted_power_of_v_min", min_entry.0, -1e-8).with_detail(min_entry.1));
    Ok(Outcome::new(m))
}

fn subordination(ws: &Workspace) -> Result<Outcome> {
    let (_, op, dec) = small_problem(ws)?;
    let w = &dec.weights;
    let mut rng = rng(ws, SALT_SUBORDINATION);
    let f = normalized(w, smooth_random(&mut rng, op.n()));
    let mut ident = (0.0f64, String::new());
    let mut min_w = (f64::INFINITY, String::new());
    let mut mass = (0.0f64, String::new());
    let mut oper = (0.0f64, String::new());
    for t in [0.5, 1.0, 2.0] {
        for alpha in [0.5, 0.7] {
            let tag = format!("t={t} alpha={alpha}");
            let meas = subordination_measure(t, alpha)?;
            if meas.identity_error > ident.0 {
                ident = (meas.identity_error, format!("{tag} lambda={}", meas.worst_lambda));
            }
            let mw = meas.weights.iter().copied().fold(f64::INFINITY, f64::min);
            if mw < min_w.0 {
                min_w = (mw, tag.clone());
            }
            let me = (meas.total_mass() - 1.0).abs();
            if me > mass.0 {
                mass = (me, tag.clone());
            }
            let sub = subordinate_semigroup(&dec, &meas, &f)?;
            let direct = dec.kernel(t, alpha)?.apply(w, &f)?;
            let e = mu_distance(w, &sub, &direct);
            if e > oper.0 {
                oper = (e, tag);
            }
        }
    }
    Ok(Outcome::new(vec![
        Metric::at_most("laplace_identity_max_err", ident.0, 1e-6).with_detail(ident.1),
        Metric::at_least("min_weight", min_w.0, 0.0).with_detail(min_w.1),
        Metric::at_most("mass_err", mass.0, 1e-6).with_detail(mass.1),
        Metric::at_most("operator_vs_kernel_mu_err", oper.0, 1e-6).with_detail(oper.1),
    ]))
}

/// Interior kernels for every `t`, wide enough for margins down to `margin`.
fn interior_kernels(ws: &Workspace, dec: &SpectralDecomposition, ts: &[f64], alpha: f64, margin: f64) -> Result<Vec<InteriorKernel>> {
    ts.par_iter()
        .map(|&t| InteriorKernel::new(dec, &ws.grid, t, alpha, margin))
        .collect()
}

fn kernel_bound(ws: &Workspace) -> Result<Outcome> {
    let dec = ws.decomposition()?;
    let c = ws.model.lyapunov_constant();
    let margin = ws.config.interior_margin;
    let block_margin = margin.min(0.25);
    let ts = log_spaced(1e-3, 1.0, 10);
    let mut m = Vec::new();
    for &alpha in &ws.config.alpha_list {
        let l = label(alpha);
        let rate = c.powf(alpha);
        let kernels = interior_kernels(ws, &dec, &ts, alpha, block_margin)?;
        let mut bad = 0usize;
        let mut plain = Vec::with_capacity(ts.len());
        let mut sens = (0.0f64, String::new());
        for k in &kernels {
            let scale = (-rate * k.t).exp();
            let s = k.sup_ratio(&ws.grid, &ws.v, margin, scale)?;
            if !(s.value.is_finite() && s.value > 0.0) {
                bad += 1;
            }
            m.push(Metric::info(format!("{l}/sup_ratio/t={}", k.t), s.value).with_detail(format!("i={} j={}", s.i, s.j)));
            plain.push(s.value / scale);
            let a = k.sup_ratio(&ws.grid, &ws.v, 0.25, 1.0)?.value;
            let b = k.sup_ratio(&ws.grid, &ws.v, 0.35, 1.0)?.value;
            let d = (a - b).abs() / a.abs();
            if d > sens.0 || d.is_nan() {
                sens = (d, format!("t={}", k.t));
            }
        }
        let (step, at) = worst_step(&ts, &plain);
        m.push(Metric::at_most(format!("{l}/nonpositive_or_nonfinite"), bad as f64, 0.0));
        m.push(Metric::at_most(format!("{l}/monotone_worst_step"), step, MONOTONE_FACTOR).with_detail(at));
        m.push(Metric::at_most(format!("{l}/margin_sensitivity"), sens.0, 0.05).with_detail(sens.1));
    }
    Ok(Outcome::new(m))
}

/// Largest ratio `values[k+1] / values[k]`.
fn worst_step(ts: &[f64], values: &[f64]) -> (f64, String) {
    let steps: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
    worst_of(ts, &steps)
}

/// Largest of `steps[k]`, labelled by the interval `ts[k] -> ts[k+1]`; NaN wins.
fn worst_of(ts: &[f64], steps: &[f64]) -> (f64, String) {
    let mut worst = (f64::NEG_INFINITY, String::new());
    for (k, &r) in steps.iter().enumerate() {
        if r > worst.0 || r.is_nan() {
            worst = (r, format!("t={} -> t={}", ts[k], ts[k + 1]));
        }
        if r.is_nan() {
            break;
        }
    }
    worst
}

fn kernel_bound_high_order(ws: &Workspace) -> Result<Outcome> {
    let dec = ws.decomposition()?;
    let c = ws.model.lyapunov_constant();
    let margin = ws.config.interior_margin;
    let ts = log_spaced(1e-2, 1.0, 10);
    let mut m = Vec::new();
    for alpha in alpha_set(&[1.0, 1.5, 2.0], &ws.config.alpha_list, |a| a >= 1.0) {
        let l = label(alpha);
        let c_alpha = c_alpha_estimate(&dec, &ws.v, alpha)?;
        let (branch, rate) = high_order_branch(alpha, c, c_alpha);
        m.push(Metric::info(format!("{l}/c_alpha"), c_alpha).with_detail(format!("branch={}", branch.name())));
        let interior = c_alpha_estimate_on(&dec, &ws.v, alpha, &ws.grid.interior(margin))?;
        m.push(Metric::info(format!("{l}/c_alpha_interior"), interior));
        let kernels = interior_kernels(ws, &dec, &ts, alpha, margin)?;
        let mut bad = 0usize;
        let mut log_ratios = Vec::with_capacity(ts.len());
        for k in &kernels {
            // the factor e^{-rate t} is constant over (x, y) and can leave the
            // f64 range for large c_alpha, so it is applied to the logarithm
            let s = k.sup_ratio(&ws.grid, &ws.v, margin, 1.0)?;
            if !(s.value.is_finite() && s.value > 0.0) {
                bad += 1;
            }
            let log_ratio = s.value.ln() - rate * k.t;
            m.push(
                Metric::info(format!("{l}/sup_ratio/t={}", k.t), log_ratio.exp())
                    .with_detail(format!("i={} j={} log={}", s.i, s.j, format_f64(log_ratio))),
            );
            log_ratios.push(log_ratio);
        }
        let steps: Vec<f64> = log_ratios.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
        let (step, at) = worst_of(&ts, &steps);
        m.push(Metric::at_most(format!("{l}/nonpositive_or_nonfinite"), bad as f64, 0.0));
        m.push(Metric::at_most(format!("{l}/monotone_worst_step"), step, MONOTONE_FACTOR).with_detail(at));
    }
    Ok(Outcome::new(m))
}

fn kernel_exponent(ws: &Workspace) -> Result<Outcome> {
    let dec = ws.decomposition()?;
    let c = ws.model.lyapunov_constant();
    let margin = ws.config.interior_margin;
    let ts = &ws.config.t_list;
    let d = ws.model.d as f64;
    let mut m = Vec::new();
    let mut flags = Vec::new();
    for alpha in alpha_set(&[0.5, 0.75, 1.0], &ws.config.alpha_list, |a| a > 0.0 && a <= 1.0) {
        let l = label(alpha);
        let rate = c.powf(alpha);
        let kernels = interior_kernels(ws, &dec, ts, alpha, margin)?;
        let mut sup = Vec::with_capacity(ts.len());
        let mut schr = Vec::with_capacity(ts.len());
        for k in &kernels {
            let scale = (-rate * k.t).exp();
            sup.push(k.sup_ratio(&ws.grid, &ws.v, margin, scale)?.value);
            schr.push(k.schrodinger_sup(&ws.model, &ws.grid, margin, scale)?.value);
        }
        let reference = -d / (2.0 * alpha);
        let fit = fit_exponent(ts, &sup)?;
        let fit_s = fit_exponent(ts, &schr)?;
        let degraded = resolution_degraded(ws.grid.h, ts[0], alpha);
        if degraded {
            flags.push(format!("{DEGRADED_FLAG}:{l}"));
        }
        let note = if degraded { "degraded-resolution" } else { "" };
        m.push(Metric::new(format!("{l}/slope"), fit.slope, super::Check::Relative, reference, EXPONENT_TOLERANCE).with_detail(note));
        m.push(Metric::info(format!("{l}/C_fit"), fit.c_fit));
        m.push(
            Metric::new(format!("{l}/schrodinger_slope"), fit_s.slope, super::Check::Relative, reference, EXPONENT_TOLERANCE)
                .with_detail(note),
        );
        m.push(Metric::info(format!("{l}/schrodinger_C_fit"), fit_s.c_fit));
    }
    Ok(Outcome { metrics: m, flags })
}

/// Closed-form `-AV/V` against divided differences of `log rho` alone.
fn finite_difference_minus_av(model: &DensityModel, x: f64, h: f64) -> f64 {
    // with r = V(x +- h)/V(x): V''/V and V'/V from ratios, so nothing overflows
    let lv = |y: f64| -0.5 * model.log_rho(y);
    let (l0, lp, lm) = (lv(x), lv(x + h), lv(x - h));
    let rp = (lp - l0).exp();
    let rm = (lm - l0).exp();
    let v2 = (rp - 2.0 + rm) / (h * h);
    let v1 = (rp - rm) / (2.0 * h);
    let g = (model.log_rho(x + h) - model.log_rho(x - h)) / (2.0 * h);
    v2 + g * v1
}

fn richardson_minus_av(model: &DensityModel, x: f64, h: f64) -> f64 {
    let d1 = finite_difference_minus_av(model, x, h);
    let d2 = finite_difference_minus_av(model, x, 0.5 * h);
    let d4 = finite_difference_minus_av(model, x, 0.25 * h);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

pub const LYAPUNOV_GRID_N: usize = 4001;
pub const LYAPUNOV_GRID_L: f64 = 40.0;
pub const FD_STEP: f64 = 1e-3;
pub const FD_WINDOW: (f64, f64) = (0.01, 10.0);

fn lyapunov_metrics(model: &DensityModel, tag: &str) -> Result<Vec<Metric>> {
    let grid = build_grid(LYAPUNOV_GRID_L, LYAPUNOV_GRID_N)?;
    let c = model.lyapunov_constant();
    let hb = model.hessian_logrho_bound();
    let mut excess = (f64::NEG_INFINITY, 0.0);
    let mut hess = (f64::NEG_INFINITY, 0.0);
    let mut fd = (0.0f64, 0.0);
    for &x in &grid.nodes {
        let e = model.minus_av_over_v(x) - c;
        if e > excess.0 || e.is_nan() {
            excess = (e, x);
        }
        let hx = model.log_rho_second(x) - hb;
        if hx > hess.0 || hx.is_nan() {
            hess = (hx, x);
        }
        if model.d == 1 && (FD_WINDOW.0..=FD_WINDOW.1).contains(&x.abs()) {
            let closed = model.minus_av_over_v(x);
            let err = (richardson_minus_av(model, x, FD_STEP) - closed).abs() / closed.abs().max(1.0);
            if err > fd.0 || err.is_nan() {
                fd = (err, x);
            }
        }
    }
    let radii = log_spaced(10.0, 100.0, 50);
    let decay = model.decay_condition_log(&radii)?;
    let mut not_decreasing = 0usize;
    for w in decay.windows(2) {
        if !(w[1].1 < w[0].1) {
            not_decreasing += 1;
        }
        if !(w[1].2 < w[0].2) {
            not_decreasing += 1;
        }
    }
    let mut m = vec![
        Metric::info(format!("{tag}/lyapunov_constant"), c),
        Metric::at_most(format!("{tag}/max_minus_av_over_v_minus_c"), excess.0, 1e-12).with_detail(format!("x={}", excess.1)),
        Metric::at_most(format!("{tag}/max_hessian_minus_bound"), hess.0, 1e-12).with_detail(format!("x={} bound={hb}", hess.1)),
    ];
    if model.d == 1 {
        m.push(Metric::at_most(format!("{tag}/finite_difference_rel_err"), fd.0, 1e-4).with_detail(format!("x={}", fd.1)));
    }
    m.push(Metric::at_most(format!("{tag}/decay_not_decreasing_steps"), not_decreasing as f64, 0.0));
    Ok(m)
}

fn model_tag(model: &DensityModel) -> String {
    match model.family {
        Family::Cauchy => format!("cauchy(beta={},d={})", model.beta, model.d),
        Family::ExpSmooth => format!("exp-smooth(a={},d={})", model.a, model.d),
        Family::ExpPower => format!("exp-power(a={},d={},K={})", model.a, model.d, model.k_cut),
        Family::Gauss => format!("gauss(d={})", model.d),
    }
}

fn lyapunov_family(ws: &Workspace, mut models: Vec<DensityModel>, accept: impl Fn(Family) -> bool) -> Result<Outcome> {
    if accept(ws.model.family) && !models.contains(&ws.model) {
        models.push(ws.model);
    }
    let mut m = Vec::new();
    for model in &models {
        m.extend(lyapunov_metrics(model, &model_tag(model))?);
    }
    Ok(Outcome::new(m))
}

fn lyapunov_cauchy(ws: &Workspace) -> Result<Outcome> {
    let models = [1.5, 2.0, 3.0]
        .iter()
        .map(|b| DensityModel::cauchy(*b, 1))
        .collect::<Result<Vec<_>>>()?;
    lyapunov_family(ws, models, |f| f == Family::Cauchy)
}

fn lyapunov_exponential(ws: &Workspace) -> Result<Outcome> {
    let mut models = [0.5, 1.0, 1.5]
        .iter()
        .map(|a| DensityModel::exp_smooth(*a, 1))
        .collect::<Result<Vec<_>>>()?;
    for a in [2.0, 3.0] {
        models.push(DensityModel::exp_power(a, 1, None)?);
    }
    lyapunov_family(ws, models, |f| matches!(f, Family::ExpSmooth | Family::ExpPower))
}

pub const GROUND_STATE_GRIDS: [usize; 2] = [801, 1601];
pub const GROUND_STATE_L: f64 = 8.0;

fn schrodinger_equivalence(ws: &Workspace) -> Result<Outcome> {
    let mut m = Vec::new();

    // both forms with zero boundary data on the configured grid
    let div = assemble_divergence_form(&ws.model, &ws.grid, BoundaryCondition::Dirichlet)?;
    let sch = assemble_schrodinger(&ws.model, &ws.grid)?;
    let mut diff = (0.0f64, 0usize);
    for k in 0..3 {
        let a = eigenvalue_by_index(&div.diag, &div.sub, k)?;
        let b = eigenvalue_by_index(&sch.diag, &sch.sub, k)?;
        m.push(Metric::info(format!("divergence_lambda_{k}"), a));
        m.push(Metric::info(format!("schrodinger_lambda_{k}"), b));
        if (a - b).abs() > diff.0 {
            diff = ((a - b).abs(), k);
        }
    }
    m.push(Metric::at_most("low_spectrum_max_diff", diff.0, 1e-3).with_detail(format!("k={}", diff.1)));

    // harmonic oscillator shifted by d: ground energy 0
    let gauss = DensityModel::gauss(1)?;
    let mut lam = Vec::new();
    for n in GROUND_STATE_GRIDS {
        let op = assemble_schrodinger(&gauss, &build_grid(GROUND_STATE_L, n)?)?;
        let l0 = eigenvalue_by_index(&op.diag, &op.sub, 0)?;
        m.push(Metric::info(format!("gauss_lambda_0/n={n}"), l0));
        lam.push(l0);
    }
    let extrapolated = (4.0 * lam[1] - lam[0]) / 3.0;
    m.push(Metric::new("gauss_ground_state_extrapolated", extrapolated, super::Check::Near, 0.0, 1e-6));

    // flat potential: Dirichlet Laplacian in closed form
    let n = 50;
    let grid = build_grid(1.0, n)?;
    let flat = assemble_schrodinger(&FlatDensity, &grid)?;
    let mut worst = (0.0f64, 0usize);
    for k in [0, 1, 4, n - 1] {
        let got = eigenvalue_by_index(&flat.diag, &flat.sub, k)?;
        let want = 2.0 / (grid.h * grid.h) * (1.0 - ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos());
        let e = (got - want).abs() / want;
        if e > worst.0 {
            worst = (e, k);
        }
    }
    m.push(Metric::at_most("flat_closed_form_rel_err", worst.0, 1e-10).with_detail(format!("k={}", worst.1)));
    Ok(Outcome::new(m))
}
