//! Weighted Nash inequalities on the discrete model: the classical form,
//! the fractional form with the certified constant `gamma`, the form for
//! powers `alpha >= 1`, and the scalar and convexity steps behind them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::{check_len, DiscreteOperator, Grid1D};
use crate::error::{Error, Result};
use crate::spectral_engine::{fractional_power, SpectralDecomposition};

pub const GAP_TOLERANCE: f64 = 1e-8;
pub const SCALAR_SLACK: f64 = 1e-12;
pub const JENSEN_SLACK: f64 = 1e-10;

/// `B(x) = x^{2/d} / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NashRate {
    pub d: u32,
    pub scale: f64,
}

impl NashRate {
    pub fn classical(d: u32) -> Self {
        Self { d, scale: 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            x.powf(2.0 / self.d as f64) / self.scale
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaCertificate {
    pub alpha: f64,
    pub epsilon: f64,
    pub n_steps: u32,
    pub a_n: f64,
    pub b_n: f64,
    pub gamma: f64,
}

/// Runs the `(a_k, b_k)` recursion until `2^{-n} <= alpha`.
pub fn gamma_certificate(alpha: f64, epsilon: f64) -> Result<GammaCertificate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1) (alpha = {alpha})")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1) (epsilon = {epsilon})")));
    }
    let mut n = 1u32;
    while 0.5f64.powi(n as i32) > alpha {
        n += 1;
    }
    let (a_seq, b_seq) = gamma_sequences(epsilon, n as usize);
    let a_n = a_seq[n as usize - 1];
    let b_n = b_seq[n as usize - 1];
    let alpha_n = 0.5f64.powi(n as i32);
    Ok(GammaCertificate {
        alpha,
        epsilon,
        n_steps: n,
        a_n,
        b_n,
        gamma: a_n.powf(alpha / alpha_n).min(b_n),
    })
}

/// `(a_1..a_len, b_1..b_len)`.
pub fn gamma_sequences(epsilon: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let root = (1.0 - epsilon * epsilon).sqrt();
    let mut a = Vec::with_capacity(len);
    let mut b = Vec::with_capacity(len);
    let (mut ak, mut bk) = (root, epsilon);
    for _ in 0..len {
        a.push(ak);
        b.push(bk);
        ak = root * ak.sqrt();
        bk *= epsilon;
    }
    (a, b)
}

/// Both sides of one inequality; `gap = rhs - lhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapTerms {
    pub lhs: f64,
    pub rhs: f64,
    pub norm2: f64,
}

impl GapTerms {
    pub fn gap(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// `gap / ||f||^2`.
    pub fn relative_gap(&self) -> f64 {
        self.gap() / self.norm2
    }
}

/// `(||f||^2, ||f||^2 / ||fV||_1^2)` in the weighted measure.
pub fn probe_norms(weights: &[f64], f: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    check_len(weights.len(), f.len())?;
    check_len(weights.len(), v.len())?;
    let mut n2 = 0.0;
    let mut l1 = 0.0;
    for ((w, a), b) in weights.iter().zip(f).zip(v) {
        n2 += a * a * w;
        l1 += a.abs() * b * w;
    }
    if !(l1 > 0.0) {
        return Err(Error::InvalidInput("probe has zero weighted L1 norm against V".into()));
    }
    Ok((n2, n2 / (l1 * l1)))
}

pub fn nash_terms(op: &DiscreteOperator, f: &[f64], c: f64, rate: &NashRate, v: &[f64]) -> Result<GapTerms> {
    let (n2, r) = probe_norms(&op.weights, f, v)?;
    let energy = op.energy(f)?;
    Ok(GapTerms {
        lhs: n2 * rate.eval(r),
        rhs: energy + c * n2,
        norm2: n2,
    })
}

/// `(A f, f) + c ||f||^2 - ||f||^2 B(||f||^2 / ||fV||_1^2)`.
pub fn nash_gap(op: &DiscreteOperator, f: &[f64], c: f64, rate: &NashRate, v: &[f64]) -> Result<f64> {
    Ok(nash_terms(op, f, c, rate, v)?.gap())
}

pub fn fractional_nash_terms(
    dec: &SpectralDecomposition,
    f: &[f64],
    alpha: f64,
    cert: &GammaCertificate,
    c: f64,
    rate: &NashRate,
    v: &[f64],
) -> Result<GapTerms> {
    let (n2, r) = probe_norms(&dec.weights, f, v)?;
    let energy = dec.quadratic_form(|l| fractional_power(l, alpha), f)?;
    let g = cert.gamma;
    Ok(GapTerms {
        lhs: g * n2 * rate.eval(g * r).powf(alpha),
        rhs: energy + c.powf(alpha) * n2,
        norm2: n2,
    })
}

/// `(A^a f, f) + c^a ||f||^2 - gamma ||f||^2 [B(gamma r)]^a`.
pub fn fractional_nash_gap(
    dec: &SpectralDecomposition,
    f: &[f64],
    alpha: f64,
    cert: &GammaCertificate,
    c: f64,
    rate: &NashRate,
    v: &[f64],
) -> Result<f64> {
    Ok(fractional_nash_terms(dec, f, alpha, cert, c, rate, v)?.gap())
}

pub fn high_order_nash_terms(
    dec: &SpectralDecomposition,
    f: &[f64],
    alpha: f64,
    c: f64,
    rate: &NashRate,
    v: &[f64],
) -> Result<GapTerms> {
    if alpha < 1.0 {
        return Err(Error::InvalidInput(format!("alpha must be at least 1 (alpha = {alpha})")));
    }
    let (n2, r) = probe_norms(&dec.weights, f, v)?;
    let energy = dec.quadratic_form(|l| fractional_power(l, alpha), f)?;
    Ok(GapTerms {
        lhs: n2 * rate.eval(r).powf(alpha),
        rhs: 2f64.powf(alpha - 1.0) * (energy + c.powf(alpha) * n2),
        norm2: n2,
    })
}

/// `2^{a-1} [(A^a f, f) + c^a ||f||^2] - ||f||^2 [B(r)]^a` for `a >= 1`.
pub fn high_order_nash_gap(
    dec: &SpectralDecomposition,
    f: &[f64],
    alpha: f64,
    c: f64,
    rate: &NashRate,
    v: &[f64],
) -> Result<f64> {
    Ok(high_order_nash_terms(dec, f, alpha, c, rate, v)?.gap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `(lambda + c)^a` against `lambda^a + c^a` (a < 1) or `2^{a-1}(lambda^a + c^a)`.
pub fn shifted_power_check(lambda: f64, c: f64, alpha: f64) -> ScalarCheck {
    let lhs = (lambda + c).powf(alpha);
    let sum = lambda.powf(alpha) + c.powf(alpha);
    let rhs = if alpha < 1.0 {
        sum
    } else {
        2f64.powf(alpha - 1.0) * sum
    };
    ScalarCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + SCALAR_SLACK,
    }
}

/// Jensen for the spectral measure of a unit vector:
/// `phi(sum lambda_k p_k) <= sum phi(lambda_k) p_k`.
pub fn jensen_check<P: Fn(f64) -> f64>(dec: &SpectralDecomposition, f: &[f64], phi: P) -> Result<ScalarCheck> {
    let n2 = dec.weighted_norm2(f);
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("jensen_check needs a unit vector (norm^2 = {n2})")));
    }
    let c = dec.coefficients(f)?;
    let mut mean = 0.0;
    let mut rhs = 0.0;
    for (l, ck) in dec.eigenvalues.iter().zip(&c) {
        let p = ck * ck;
        mean += l * p;
        rhs += phi(*l) * p;
    }
    let lhs = phi(mean);
    Ok(ScalarCheck {
        lhs,
        rhs,
        // relative slack: equality cases carry roundoff proportional to rhs
        ok: lhs <= rhs + JENSEN_SLACK * rhs.abs().max(1.0),
    })
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub id: String,
    pub values: Vec<f64>,
}

pub const PROBE_EIGENFUNCTIONS: usize = 8;
pub const PROBE_CENTERS: usize = 8;
pub const PROBE_WIDTHS: [f64; 2] = [0.5, 2.0];
pub const PROBE_RANDOM: usize = 40;

/// 8 eigenfunctions, 16 Gaussian bumps and 40 smoothed random sign vectors,
/// keeping those with `||fV||_1 > 1e-12`.
pub fn probe_family(dec: &SpectralDecomposition, grid: &Grid1D, v: &[f64], seed: u64) -> Vec<Probe> {
    let n = grid.n;
    let mut probes = Vec::with_capacity(64);
    for k in 0..PROBE_EIGENFUNCTIONS.min(n) {
        probes.push(Probe {
            id: format!("eig{k}"),
            values: dec.phi(k).to_vec(),
        });
    }
    let span = 0.25 * grid.l;
    for c in 0..PROBE_CENTERS {
        let center = -span + 2.0 * span * c as f64 / (PROBE_CENTERS - 1) as f64;
        for (wi, width) in PROBE_WIDTHS.iter().enumerate() {
            probes.push(Probe {
                id: format!("bump{c}w{wi}"),
                values: grid
                    .nodes
                    .iter()
                    .map(|x| (-(x - center).powi(2) / (2.0 * width * width)).exp())
                    .collect(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..PROBE_RANDOM {
        let raw: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let mut smooth = raw.clone();
        for i in 1..n - 1 {
            smooth[i] = 0.25 * (raw[i - 1] + 2.0 * raw[i] + raw[i + 1]);
        }
        probes.push(Probe {
            id: format!("rand{r}"),
            values: smooth,
        });
    }
    probes.retain(|p| {
        let l1: f64 = p
            .values
            .iter()
            .zip(v)
            .zip(&dec.weights)
            .map(|((a, b), w)| a.abs() * b * w)
            .sum();
        l1 > 1e-12
    });
    probes
}

#[derive(Debug, Clone, Serialize)]
pub struct NashConstant {
    pub scale: f64,
    pub argmax: String,
}

/// Largest `||f||^2 r^{2/d} / ((A f, f) + c ||f||^2)` over the probes; with
/// this as the rate scale every probe satisfies the classical inequality.
pub fn estimate_nash_constant(
    op: &DiscreteOperator,
    probes: &[Probe],
    c: f64,
    v: &[f64],
    d: u32,
) -> Result<NashConstant> {
    let unit = NashRate::classical(d);
    let mut best = NashConstant {
        scale: 0.0,
        argmax: String::new(),
    };
    for p in probes {
        let t = nash_terms(op, &p.values, c, &unit, v)?;
        let ratio = t.lhs / t.rhs;
        if ratio > best.scale {
            best.scale = ratio;
            best.argmax = p.id.clone();
        }
    }
    if !(best.scale > 0.0 && best.scale.is_finite()) {
        return Err(Error::InvalidInput("probe family gives no finite Nash constant".into()));
    }
    Ok(best)
}
