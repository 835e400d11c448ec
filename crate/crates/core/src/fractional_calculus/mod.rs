//! Routes to `A^alpha` and `exp(-t A^alpha)` that avoid the eigensolver:
//! the Balakrishnan resolvent integral and subordination of the heat
//! semigroup.

mod contour;
mod quadrature;

pub use contour::{stable_density, CONTOUR_HALF_NODES};
pub use quadrature::{composite_gauss_legendre, gauss_legendre, QuadratureKind, QuadratureRule};

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::discretization::{check_len, BoundaryCondition, DiscreteOperator, OperatorForm};
use crate::error::{Error, Result};
use crate::spectral_engine::SpectralDecomposition;

/// Tail length, in units of `1/alpha` or `1/(1-alpha)`, kept on each side.
const TAIL: f64 = 25.0;
/// Minimum tail length accepted by `balakrishnan_scalar`.
const MIN_TAIL: f64 = 20.0;
const PANEL: f64 = 2.0;
const ORDER: usize = 16;
/// Lower end of the spectral window for operator rules.
pub const OPERATOR_LAMBDA_FLOOR: f64 = 1e-8;
pub const IDENTITY_TOLERANCE: f64 = 1e-6;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha must lie in (0, 1) (alpha = {alpha})")))
    }
}

/// Rule for `int_0^inf s^{alpha-1} lambda/(s+lambda) ds` accurate for
/// `lambda` in `[lambda_lo, lambda_hi]`.
pub fn balakrishnan_rule(alpha: f64, lambda_lo: f64, lambda_hi: f64) -> Result<QuadratureRule> {
    check_alpha(alpha)?;
    if !(lambda_lo > 0.0 && lambda_hi >= lambda_lo && lambda_hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "bad spectral window [{lambda_lo}, {lambda_hi}]"
        )));
    }
    let u_lo = lambda_lo.ln() - TAIL / alpha;
    let u_hi = lambda_hi.ln() + TAIL / (1.0 - alpha);
    QuadratureRule::log_substituted(u_lo, u_hi, PANEL, ORDER)
}

fn check_coverage(lambda: f64, alpha: f64, rule: &QuadratureRule) -> Result<()> {
    let (lo, hi) = rule.range;
    let left = alpha * (lambda.ln() - lo.ln());
    let right = (1.0 - alpha) * (hi.ln() - lambda.ln());
    if left < MIN_TAIL || right < MIN_TAIL {
        return Err(Error::Quadrature(format!(
            "node range [{lo:e}, {hi:e}] too narrow for lambda = {lambda:e} at alpha = {alpha}"
        )));
    }
    Ok(())
}

/// `(sin(alpha pi)/pi) int s^{alpha-1} lambda/(s+lambda) ds`, which equals `lambda^alpha`.
pub fn balakrishnan_scalar(lambda: f64, alpha: f64, rule: &QuadratureRule) -> Result<f64> {
    check_alpha(alpha)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be positive (lambda = {lambda})")));
    }
    check_coverage(lambda, alpha, rule)?;
    let sum = rule.integrate(|s| s.powf(alpha - 1.0) * lambda / (s + lambda));
    Ok((alpha * PI).sin() / PI * sum)
}

/// Rule covering the spectrum of `op` (Gershgorin bound above, a fixed floor below).
pub fn operator_rule(op: &DiscreteOperator, alpha: f64) -> Result<QuadratureRule> {
    let hi = op.spectral_bound().max(1.0);
    balakrishnan_rule(alpha, OPERATOR_LAMBDA_FLOOR, hi)
}

/// Conductances of the edges `(i, i+1)` recovered from `S`.
fn edge_conductances(op: &DiscreteOperator) -> Vec<f64> {
    op.sub
        .iter()
        .enumerate()
        .map(|(i, s)| -s * (op.weights[i] * op.weights[i + 1]).sqrt())
        .collect()
}

/// Neumann divergence-form operators factor as `S = B^T B` with `B` the
/// weighted difference map onto edges. `B B^T` is positive definite, so
/// `(s + S)^{-1} S = B^T (s + B B^T)^{-1} B` needs no singular solves.
struct EdgeFactor {
    sqrt_k: Vec<f64>,
    sqrt_w: Vec<f64>,
    edge_op: DiscreteOperator,
}

impl EdgeFactor {
    fn new(op: &DiscreteOperator) -> Self {
        let n = op.n();
        let k = edge_conductances(op);
        let sqrt_k: Vec<f64> = k.iter().map(|v| v.sqrt()).collect();
        let sqrt_w = op.sqrt_weights();
        let diag = (0..n - 1)
            .map(|e| k[e] * (1.0 / op.weights[e] + 1.0 / op.weights[e + 1]))
            .collect();
        let sub = (0..n.saturating_sub(2))
            .map(|e| -sqrt_k[e] * sqrt_k[e + 1] / op.weights[e + 1])
            .collect();
        let grid = op.grid.clone();
        let edge_op = DiscreteOperator {
            grid,
            sub,
            diag,
            weights: vec![1.0; n - 1],
            bc: op.bc,
            form: op.form,
        };
        Self {
            sqrt_k,
            sqrt_w,
            edge_op,
        }
    }

    fn forward(&self, g: &[f64]) -> Vec<f64> {
        (0..self.sqrt_k.len())
            .map(|e| self.sqrt_k[e] * (g[e + 1] / self.sqrt_w[e + 1] - g[e] / self.sqrt_w[e]))
            .collect()
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let n = self.sqrt_w.len();
        let mut out = vec![0.0; n];
        for (e, v) in y.iter().enumerate() {
            let a = self.sqrt_k[e] * v;
            out[e] -= a / self.sqrt_w[e];
            out[e + 1] += a / self.sqrt_w[e + 1];
        }
        out
    }
}

/// `A^alpha f` through the resolvent integral with tridiagonal solves.
pub fn balakrishnan_apply(op: &DiscreteOperator, f: &[f64], alpha: f64, rule: &QuadratureRule) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_len(op.n(), f.len())?;
    let neumann = op.bc == BoundaryCondition::Neumann && op.form == OperatorForm::Divergence;
    if !neumann {
        return balakrishnan_apply_shifted(op, 0.0, f, alpha, rule);
    }
    let factor = EdgeFactor::new(op);
    let g: Vec<f64> = f.iter().zip(&factor.sqrt_w).map(|(a, s)| a * s).collect();
    let bg = factor.forward(&g);
    let mut acc = vec![0.0; bg.len()];
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        let y = factor.edge_op.shifted_solve(*s, &bg)?;
        let c = w * s.powf(alpha - 1.0);
        for (a, v) in acc.iter_mut().zip(&y) {
            *a += c * v;
        }
    }
    let scale = (alpha * PI).sin() / PI;
    let out = factor.adjoint(&acc);
    Ok(out
        .iter()
        .zip(&factor.sqrt_w)
        .map(|(v, s)| scale * v / s)
        .collect())
}

/// `(A + shift)^alpha f`. The shifted operator must be positive definite.
pub fn balakrishnan_apply_shifted(
    op: &DiscreteOperator,
    shift: f64,
    f: &[f64],
    alpha: f64,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_len(op.n(), f.len())?;
    let sw = op.sqrt_weights();
    let g: Vec<f64> = f.iter().zip(&sw).map(|(a, s)| a * s).collect();
    let r: Vec<f64> = op
        .apply_symmetric(&g)?
        .iter()
        .zip(&g)
        .map(|(a, b)| a + shift * b)
        .collect();
    let mut acc = vec![0.0; r.len()];
    for (s, w) in rule.nodes.iter().zip(&rule.weights) {
        let y = op.shifted_solve(s + shift, &r)?;
        let c = w * s.powf(alpha - 1.0);
        for (a, v) in acc.iter_mut().zip(&y) {
            *a += c * v;
        }
    }
    let scale = (alpha * PI).sin() / PI;
    Ok(acc.iter().zip(&sw).map(|(v, s)| scale * v / s).collect())
}

#[derive(Debug, Clone)]
pub struct SubordinationMeasure {
    pub t: f64,
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Largest Laplace-identity error found on `[0, 100]`.
    pub identity_error: f64,
    pub worst_lambda: f64,
}

impl SubordinationMeasure {
    /// `sum_q w_q exp(-s_q lambda)`.
    pub fn laplace(&self, lambda: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * (-s * lambda).exp())
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Points of `[0, 100]` where the Laplace identity is checked.
pub fn identity_grid() -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=1000).map(|j| 0.1 * j as f64).collect();
    pts.extend((0..=120).map(|j| 10f64.powf(-6.0 + 8.0 * j as f64 / 120.0)));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn half_order_nodes(t: f64) -> (Vec<f64>, Vec<f64>) {
    // s = t^2/(4u^2) turns the density into (2/sqrt(pi)) e^{-u^2} du
    // geometric panels toward u = 0 resolve the sqrt(lambda) behaviour of the
    // transform at small lambda (the heavy tail in s)
    let mut us = Vec::new();
    let mut ws = Vec::new();
    let mut hi = 0.125;
    while hi > 1e-9 {
        let (x, w) = composite_gauss_legendre(0.5 * hi, hi, hi, ORDER);
        us.extend(x);
        ws.extend(w);
        hi *= 0.5;
    }
    let (x, w) = composite_gauss_legendre(0.125, 6.5, 0.125, ORDER);
    us.extend(x);
    ws.extend(w);
    let c = 2.0 / PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = us
        .iter()
        .zip(&ws)
        .map(|(u, w)| (t * t / (4.0 * u * u), c * w * (-u * u).exp()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn contour_nodes(t: f64, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let lt = t.ln();
    let v_lo = lt / alpha + alpha.ln() - (1.0 - alpha) / alpha * (40.0 / (1.0 - alpha)).ln();
    let tail_hi = ((t / gamma(1.0 - alpha)).ln() + 1e11f64.ln()) / alpha;
    let v_hi = tail_hi.max(lt / alpha + 5.0);
    let (vs, ws) = composite_gauss_legendre(v_lo, v_hi, 0.5, ORDER);
    let mut nodes = Vec::with_capacity(vs.len());
    let mut weights = Vec::with_capacity(vs.len());
    for (v, w) in vs.iter().zip(&ws) {
        let s = v.exp();
        let mut wt = w * s * stable_density(s, t, alpha);
        if !wt.is_finite() {
            return Err(Error::Quadrature(format!("contour density not finite at s = {s:e}")));
        }
        if wt < 0.0 {
            if wt < -1e-12 {
                return Err(Error::Quadrature(format!("negative subordination weight {wt:e} at s = {s:e}")));
            }
            wt = 0.0;
        }
        nodes.push(s);
        weights.push(wt);
    }
    Ok((nodes, weights))
}

/// Discrete probability measure with Laplace transform `exp(-t lambda^alpha)`.
pub fn subordination_measure(t: f64, alpha: f64) -> Result<SubordinationMeasure> {
    check_alpha(alpha)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t must be positive (t = {t})")));
    }
    let (nodes, weights) = if alpha == 0.5 {
        half_order_nodes(t)
    } else {
        contour_nodes(t, alpha)?
    };
    let mut meas = SubordinationMeasure {
        t,
        alpha,
        nodes,
        weights,
        identity_error: 0.0,
        worst_lambda: 0.0,
    };
    for lambda in identity_grid() {
        let err = (meas.laplace(lambda) - (-t * lambda.powf(alpha)).exp()).abs();
        if err > meas.identity_error || err.is_nan() {
            meas.identity_error = err;
            meas.worst_lambda = lambda;
        }
    }
    if !(meas.identity_error <= IDENTITY_TOLERANCE) {
        return Err(Error::IdentityCheck {
            worst_lambda: meas.worst_lambda,
            error: meas.identity_error,
            tolerance: IDENTITY_TOLERANCE,
        });
    }
    Ok(meas)
}

/// `sum_q w_q T(s_q) f` with the heat semigroup applied spectrally.
pub fn subordinate_semigroup(dec: &SpectralDecomposition, meas: &SubordinationMeasure, f: &[f64]) -> Result<Vec<f64>> {
    dec.apply_function(|l| meas.laplace(l.max(0.0)), f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_examples() {
        let rule = balakrishnan_rule(0.5, 1e-4, 1e6).unwrap();
        assert!((balakrishnan_scalar(4.0, 0.5, &rule).unwrap() - 2.0).abs() < 1e-8 * 2.0);
        for a in [0.1, 0.3, 0.7, 0.9] {
            let rule = balakrishnan_rule(a, 1e-4, 1e6).unwrap();
            assert!((balakrishnan_scalar(1.0, a, &rule).unwrap() - 1.0).abs() < 1e-8);
        }
        let rule = balakrishnan_rule(0.9, 1e-4, 1e6).unwrap();
        let want = 10f64.powf(0.9);
        assert!((balakrishnan_scalar(10.0, 0.9, &rule).unwrap() - want).abs() < 1e-8 * want);
    }

    #[test]
    fn scalar_rejects_uncovered_lambda() {
        let rule = balakrishnan_rule(0.5, 1.0, 10.0).unwrap();
        assert!(matches!(balakrishnan_scalar(1e-12, 0.5, &rule), Err(Error::Quadrature(_))));
        assert!(balakrishnan_scalar(0.0, 0.5, &rule).is_err());
        assert!(balakrishnan_rule(1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn measure_examples() {
        let m = subordination_measure(1.0, 0.5).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-6);
        assert!((m.laplace(1.0) - (-1f64).exp()).abs() < 1e-6);
        let m = subordination_measure(2.0, 0.7).unwrap();
        assert!((m.laplace(3.0) - (-2.0 * 3f64.powf(0.7)).exp()).abs() < 1e-6);
        assert!(m.weights.iter().all(|w| *w >= 0.0));
        assert!(m.nodes.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn near_one_aborts() {
        assert!(matches!(subordination_measure(1.0, 0.97), Err(Error::IdentityCheck { .. })));
    }
}
