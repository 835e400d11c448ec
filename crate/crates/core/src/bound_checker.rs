//! Rate functions `U`, `K` for power-type Nash rates and pointwise kernel
//! bounds of the form `p(t,x,y) <= K(t)^2 e^{bt} V(x) V(y)`.

use ndarray::Array2;
use serde::Serialize;

use crate::discretization::Grid1D;
use crate::error::{Error, Result};
use crate::measure_models::Density;
use crate::spectral_engine::{fractional_power, KernelMatrix, SpectralDecomposition};

pub const EXPONENT_TOLERANCE: f64 = 0.15;
pub const MONOTONE_FACTOR: f64 = 1.02;
pub const MAX_MARGIN: f64 = 0.45;

/// `U(x) = C_U x^{-2a/d}` with `C_U = d/(2 a gamma^{1+2a/d})`, and
/// `K = sqrt(U^{-1})`, frozen at `sqrt(M)` above `U(M)` when `M > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFunctions {
    pub alpha: f64,
    pub gamma: f64,
    pub d: u32,
    pub floor: f64,
}

impl RateFunctions {
    pub fn new(alpha: f64, gamma: f64, d: u32) -> Result<Self> {
        if !(alpha > 0.0 && gamma > 0.0 && d > 0 && alpha.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "rate functions need alpha, gamma, d > 0 (alpha = {alpha}, gamma = {gamma}, d = {d})"
            )));
        }
        Ok(Self {
            alpha,
            gamma,
            d,
            floor: 0.0,
        })
    }

    pub fn with_floor(mut self, m: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::InvalidInput(format!("floor M must be non-negative (M = {m})")));
        }
        self.floor = m;
        Ok(self)
    }

    fn p(&self) -> f64 {
        2.0 * self.alpha / self.d as f64
    }

    pub fn c_u(&self) -> f64 {
        self.d as f64 / (2.0 * self.alpha * self.gamma.powf(1.0 + self.p()))
    }

    pub fn c_k(&self) -> f64 {
        self.c_u().powf(1.0 / (2.0 * self.p()))
    }

    pub fn u(&self, x: f64) -> Result<f64> {
        positive(x)?;
        Ok(self.c_u() * x.powf(-self.p()))
    }

    pub fn k(&self, x: f64) -> Result<f64> {
        positive(x)?;
        if self.floor > 0.0 && x >= self.u(self.floor)? {
            return Ok(self.floor.sqrt());
        }
        Ok(self.c_k() * x.powf(-1.0 / (2.0 * self.p())))
    }
}

fn positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("argument must be positive (x = {x})")))
    }
}

pub fn rate_u(alpha: f64, gamma: f64, d: u32, x: f64) -> Result<f64> {
    RateFunctions::new(alpha, gamma, d)?.u(x)
}

pub fn rate_k(alpha: f64, gamma: f64, d: u32, x: f64) -> Result<f64> {
    RateFunctions::new(alpha, gamma, d)?.k(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSup {
    pub value: f64,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `e^{c^alpha t}`
    #[serde(rename = "c^alpha")]
    PowerOfC,
    /// `e^{c_alpha t}`
    #[serde(rename = "c_alpha")]
    CAlpha,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::PowerOfC => "c^alpha",
            Branch::CAlpha => "c_alpha",
        }
    }
}

fn check_margin(margin: f64) -> Result<()> {
    if (0.0..=MAX_MARGIN).contains(&margin) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("interior margin must lie in [0, {MAX_MARGIN}] (margin = {margin})")))
    }
}

fn check_lyapunov(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: v.len(),
        });
    }
    if let Some(i) = v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::NonFinite { what: "Lyapunov samples", index: i });
    }
    Ok(())
}

/// Largest `entry(a, b) / (V_i V_j)` over positions `a, b` of `index`.
fn sup_pairs<F: Fn(usize, usize) -> f64>(entry: F, index: &[usize], v: &[f64]) -> Result<BoundSup> {
    if index.is_empty() {
        return Err(Error::InvalidInput("empty interior".into()));
    }
    let mut best = BoundSup {
        value: f64::NEG_INFINITY,
        i: index[0],
        j: index[0],
    };
    for (a, &i) in index.iter().enumerate() {
        for (b, &j) in index.iter().enumerate() {
            let r = entry(a, b) / (v[i] * v[j]);
            if r > best.value || r.is_nan() {
                best = BoundSup { value: r, i, j };
                if r.is_nan() {
                    return Ok(best);
                }
            }
        }
    }
    Ok(best)
}

/// Sup over interior pairs of `values[i][j] / (V_i V_j)`, times `scale`.
pub fn interior_sup(values: &Array2<f64>, grid: &Grid1D, v: &[f64], margin: f64, scale: f64) -> Result<BoundSup> {
    check_margin(margin)?;
    check_lyapunov(v, grid.n)?;
    if values.nrows() != grid.n || values.ncols() != grid.n {
        return Err(Error::LengthMismatch {
            expected: grid.n,
            found: values.nrows(),
        });
    }
    let idx = grid.interior(margin);
    let idx_ref = &idx;
    let mut best = sup_pairs(|a, b| values[[idx_ref[a], idx_ref[b]]], &idx, v)?;
    best.value *= scale;
    Ok(best)
}

/// Sup of `p(t,x,y) / (V(x) V(y) e^{c^alpha t})` over the interior.
pub fn bound_ratio(kern: &KernelMatrix, grid: &Grid1D, v: &[f64], c: f64, margin: f64) -> Result<BoundSup> {
    let rate = c.powf(kern.alpha);
    interior_sup(&kern.values, grid, v, margin, (-rate * kern.t).exp())
}

/// Kernel of `exp(-t A^alpha)` on the interior block only.
#[derive(Debug, Clone)]
pub struct InteriorKernel {
    pub t: f64,
    pub alpha: f64,
    pub margin: f64,
    pub index: Vec<usize>,
    pub values: Array2<f64>,
}

impl InteriorKernel {
    pub fn new(dec: &SpectralDecomposition, grid: &Grid1D, t: f64, alpha: f64, margin: f64) -> Result<Self> {
        check_margin(margin)?;
        if dec.n() != grid.n {
            return Err(Error::LengthMismatch {
                expected: grid.n,
                found: dec.n(),
            });
        }
        if !(t > 0.0 && t.is_finite() && alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel needs t > 0 and alpha > 0 (t = {t}, alpha = {alpha})"
            )));
        }
        let index = grid.interior(margin);
        if index.is_empty() {
            return Err(Error::InvalidInput("empty interior".into()));
        }
        let values = dec.function_kernel_block(|l| (-t * fractional_power(l, alpha)).exp(), &index)?;
        Ok(Self {
            t,
            alpha,
            margin,
            index,
            values,
        })
    }

    fn positions(&self, grid: &Grid1D, margin: f64) -> Result<Vec<usize>> {
        check_margin(margin)?;
        if margin < self.margin {
            return Err(Error::InvalidInput(format!(
                "margin {margin} is wider than the stored block ({})",
                self.margin
            )));
        }
        let cut = (1.0 - margin) * grid.l * (1.0 + 1e-12);
        Ok((0..self.index.len())
            .filter(|&a| grid.nodes[self.index[a]].abs() <= cut)
            .collect())
    }

    /// `sup p_ij / (V_i V_j)` over `|x| <= (1 - margin) L`, times `scale`.
    pub fn sup_ratio(&self, grid: &Grid1D, v: &[f64], margin: f64, scale: f64) -> Result<BoundSup> {
        check_lyapunov(v, grid.n)?;
        let pos = self.positions(grid, margin)?;
        let idx: Vec<usize> = pos.iter().map(|&a| self.index[a]).collect();
        let mut best = sup_pairs(|a, b| self.values[[pos[a], pos[b]]], &idx, v)?;
        best.value *= scale;
        Ok(best)
    }

    /// `sup sqrt(rho_i rho_j) p_ij`, times `scale`.
    pub fn schrodinger_sup<D: Density + ?Sized>(&self, density: &D, grid: &Grid1D, margin: f64, scale: f64) -> Result<BoundSup> {
        let inv: Vec<f64> = grid.nodes.iter().map(|x| 1.0 / density.rho(*x).sqrt()).collect();
        self.sup_ratio(grid, &inv, margin, scale)
    }
}

/// Branch for `alpha >= 1`: `c_alpha` if `c_alpha >= c^alpha`, else `c^alpha`.
pub fn high_order_branch(alpha: f64, c: f64, c_alpha: f64) -> (Branch, f64) {
    let ca = c.powf(alpha);
    if c_alpha >= ca {
        (Branch::CAlpha, c_alpha)
    } else {
        (Branch::PowerOfC, ca)
    }
}

pub fn bound_ratio_high_order(
    kern: &KernelMatrix,
    grid: &Grid1D,
    v: &[f64],
    c: f64,
    c_alpha: f64,
    margin: f64,
) -> Result<(BoundSup, Branch)> {
    if kern.alpha < 1.0 {
        return Err(Error::InvalidInput(format!("alpha must be at least 1 (alpha = {})", kern.alpha)));
    }
    let (branch, rate) = high_order_branch(kern.alpha, c, c_alpha);
    Ok((interior_sup(&kern.values, grid, v, margin, (-rate * kern.t).exp())?, branch))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub c_fit: f64,
}

/// Least-squares line through `(ln t, ln ratio)`.
pub fn fit_exponent(t: &[f64], ratios: &[f64]) -> Result<ExponentFit> {
    if t.len() != ratios.len() {
        return Err(Error::LengthMismatch {
            expected: t.len(),
            found: ratios.len(),
        });
    }
    if t.len() < 5 {
        return Err(Error::InvalidInput(format!("exponent fit needs at least 5 points (got {})", t.len())));
    }
    if t.iter().any(|x| !(*x > 0.0)) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("fit times must be positive and increasing".into()));
    }
    if let Some(k) = ratios.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidInput(format!("non-positive ratio {} at t = {}", ratios[k], t[k])));
    }
    let xs: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = ratios.iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(ExponentFit {
        slope,
        c_fit: (my - slope * mx).exp(),
    })
}

/// `max(0, max_i -(A^a V)_i / V_i)` over all nodes.
pub fn c_alpha_estimate(dec: &SpectralDecomposition, v: &[f64], alpha: f64) -> Result<f64> {
    let all: Vec<usize> = (0..dec.n()).collect();
    c_alpha_estimate_on(dec, v, alpha, &all)
}

/// As [`c_alpha_estimate`] with the max restricted to `index`. For
/// `alpha > 1` the all-node value is dominated by the boundary layer that
/// `V` (which ignores the boundary condition) creates next to `+-L`, and it
/// grows under refinement; the interior value converges.
pub fn c_alpha_estimate_on(dec: &SpectralDecomposition, v: &[f64], alpha: f64, index: &[usize]) -> Result<f64> {
    if alpha < 1.0 {
        return Err(Error::InvalidInput(format!("alpha must be at least 1 (alpha = {alpha})")));
    }
    check_lyapunov(v, dec.n())?;
    let av = dec.apply_function(|l| fractional_power(l, alpha), v)?;
    let mut best = 0.0f64;
    for &i in index {
        let r = av.get(i).ok_or(Error::LengthMismatch {
            expected: dec.n(),
            found: i + 1,
        })?;
        best = best.max(-r / v[i]);
    }
    Ok(best)
}

/// `sqrt(rho_i rho_j) p_ij`, the kernel of the ground-state transform.
pub fn schrodinger_kernel<D: Density + ?Sized>(kern: &KernelMatrix, density: &D, grid: &Grid1D) -> Result<Array2<f64>> {
    if kern.n() != grid.n {
        return Err(Error::LengthMismatch {
            expected: grid.n,
            found: kern.n(),
        });
    }
    let sr: Vec<f64> = grid.nodes.iter().map(|x| density.rho(*x).sqrt()).collect();
    let mut out = kern.values.clone();
    for ((i, j), val) in out.indexed_iter_mut() {
        *val *= sr[i] * sr[j];
    }
    Ok(out)
}

/// True when the kernel width `t^{1/(2 alpha)}` is below two grid steps.
pub fn resolution_degraded(h: f64, t_min: f64, alpha: f64) -> bool {
    t_min.powf(1.0 / (2.0 * alpha)) < 2.0 * h
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub alpha: f64,
    pub t_values: Vec<f64>,
    pub sup_ratio: Vec<f64>,
    pub bound_branch: Vec<Branch>,
    pub fitted_exponent: f64,
    pub reference_exponent: f64,
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    pub degraded: bool,
}

impl BoundReport {
    pub fn within_tolerance(&self) -> bool {
        (self.fitted_exponent - self.reference_exponent).abs() <= EXPONENT_TOLERANCE * self.reference_exponent.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_u_examples() {
        assert!((rate_u(0.5, 1.0, 1, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((rate_u(1.0, 1.0, 2, 2.0).unwrap() - 0.5).abs() < 1e-15);
        let g = 0.37;
        let lhs = rate_u(0.7, g, 3, 2.5).unwrap();
        let rhs = g.powf(-(1.0 + 1.4 / 3.0)) * rate_u(0.7, 1.0, 3, 2.5).unwrap();
        assert!((lhs - rhs).abs() < 1e-14 * rhs);
        assert!(rate_u(0.5, 1.0, 1, 0.0).is_err());
    }

    #[test]
    fn rate_k_examples() {
        for x in [0.1, 1.0, 7.0] {
            assert!((rate_k(0.5, 1.0, 1, x).unwrap() - x.powf(-0.5)).abs() < 1e-15);
            // C_U = 1/(2 * 0.5 * 0.25) = 4
            assert!((rate_k(0.5, 0.5, 1, x).unwrap() - (4.0 / x).sqrt()).abs() < 1e-14);
        }
        let r = RateFunctions::new(0.5, 1.0, 1).unwrap();
        assert!((r.k(r.u(3.0).unwrap()).unwrap().powi(2) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn floor_freezes_k() {
        let r = RateFunctions::new(0.5, 1.0, 1).unwrap().with_floor(2.0).unwrap();
        let um = r.u(2.0).unwrap();
        assert_eq!(r.k(um * 1.5).unwrap(), 2f64.sqrt());
        assert!(r.k(um * 0.5).unwrap() > 2f64.sqrt());
    }

    #[test]
    fn fit_exact_power() {
        let t: Vec<f64> = (0..6).map(|k| 1e-3 * 10f64.powf(k as f64 / 5.0)).collect();
        let r: Vec<f64> = t.iter().map(|x| 7.0 / x).collect();
        let fit = fit_exponent(&t, &r).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.c_fit - 7.0).abs() < 1e-9);
        assert!(fit_exponent(&t[..4], &r[..4]).is_err());
        let mut bad = r.clone();
        bad[2] = 0.0;
        assert!(fit_exponent(&t, &bad).is_err());
    }

    #[test]
    fn branches() {
        assert_eq!(high_order_branch(2.0, 2.0, 4.0).0, Branch::CAlpha);
        assert_eq!(high_order_branch(2.0, 2.0, 3.0), (Branch::PowerOfC, 4.0));
        assert_eq!(high_order_branch(1.5, 0.0, 0.0).0, Branch::CAlpha);
    }
}
