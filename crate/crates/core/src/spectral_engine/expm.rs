//! Dense `exp(-t S)` by scaling and squaring of a Taylor polynomial.
//!
//! The scaling power is chosen from the backward-error series
//! `h(x) = log(e^{-x} T_m(x)) = sum_{k > m} c_k x^k`: with `||X|| <= theta_m`
//! the computed `T_m(X)^{2^s}` is `exp(X + dX)` with `||dX|| <= u ||X||`.

use std::sync::OnceLock;

use ndarray::Array2;

use crate::discretization::DiscreteOperator;
use crate::error::{Error, Result};

pub const TAYLOR_DEGREE: usize = 18;
pub const MAX_ORACLE_SIZE: usize = 400;
const SERIES_LEN: usize = 100;

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|j| (j as f64).ln()).sum()
}

fn truncate_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; SERIES_LEN];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(SERIES_LEN - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficients of `log(e^{-x} T_m(x))` up to degree `SERIES_LEN - 1`.
pub fn backward_error_series(m: usize) -> Vec<f64> {
    // e^{-x} T_m(x) = 1 + y(x); for j > m the coefficient of x^j is
    // (-1)^{j+m} / (j m! (j-m-1)!) (closed form of the alternating binomial sum)
    let mut y = vec![0.0; SERIES_LEN];
    let lm = ln_factorial(m);
    for (j, yj) in y.iter_mut().enumerate().skip(m + 1) {
        let mag = (-((j as f64).ln() + lm + ln_factorial(j - m - 1))).exp();
        *yj = if (j + m).is_multiple_of(2) { mag } else { -mag };
    }
    let mut out = vec![0.0; SERIES_LEN];
    let mut pow = y.clone();
    let mut r = 1;
    while pow.iter().any(|v| *v != 0.0) {
        let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
        for (o, p) in out.iter_mut().zip(&pow) {
            *o += sign * p / r as f64;
        }
        pow = truncate_mul(&pow, &y);
        r += 1;
    }
    out
}

/// Largest `theta` with `sum |c_k| theta^{k-1} <= 2^-53`.
pub fn taylor_backward_theta(m: usize) -> f64 {
    let c = backward_error_series(m);
    let u = f64::EPSILON / 2.0;
    let bound = |theta: f64| -> f64 {
        c.iter()
            .enumerate()
            .skip(1)
            .map(|(k, ck)| ck.abs() * theta.powi(k as i32 - 1))
            .sum()
    };
    let (mut lo, mut hi) = (0.0f64, 16.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn theta() -> f64 {
    static THETA: OnceLock<f64> = OnceLock::new();
    *THETA.get_or_init(|| taylor_backward_theta(TAYLOR_DEGREE))
}

fn norm1(a: &Array2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(-t S)` for the symmetrized operator, without any eigendecomposition.
pub fn matrix_exponential_oracle(op: &DiscreteOperator, t: f64) -> Result<Array2<f64>> {
    let n = op.n();
    if n > MAX_ORACLE_SIZE {
        return Err(Error::InvalidInput(format!(
            "dense exponential limited to n <= {MAX_ORACLE_SIZE} (n = {n})"
        )));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t must be non-negative (t = {t})")));
    }
    let x = op.dense_symmetric() * (-t);
    expm_dense(&x)
}

pub fn expm_dense(x: &Array2<f64>) -> Result<Array2<f64>> {
    let n = x.nrows();
    let nrm = norm1(x);
    if !nrm.is_finite() {
        return Err(Error::Overflow("matrix norm is not finite".into()));
    }
    let th = theta();
    let s = if nrm <= th {
        0
    } else {
        (nrm / th).log2().ceil() as i32
    };
    if s > 1000 {
        return Err(Error::Overflow(format!("norm {nrm:e} needs {s} squarings")));
    }
    let scaled = x * 2f64.powi(-s);
    let eye = Array2::<f64>::eye(n);
    let mut p = eye.clone();
    for k in (1..=TAYLOR_DEGREE).rev() {
        p = &eye + &(scaled.dot(&p) / k as f64);
    }
    for _ in 0..s {
        p = p.dot(&p);
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("exponential overflowed".into()));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn theta_matches_published_magnitude() {
        // double-precision Taylor thresholds are ~1.09 at degree 18
        let th = taylor_backward_theta(18);
        assert!(th > 1.0 && th < 1.2, "theta = {th}");
        assert!(taylor_backward_theta(12) < th);
    }

    #[test]
    fn series_starts_at_degree_m_plus_one() {
        let c = backward_error_series(5);
        assert!(c[..6].iter().all(|v| *v == 0.0));
        // leading term of log(1+y) is y: coefficient -1/(6 * 5! * 0!)
        assert!((c[6] + 1.0 / 720.0).abs() < 1e-18);
    }

    #[test]
    fn scalar_and_identity() {
        let e = expm_dense(&array![[-2.5]]).unwrap();
        assert!((e[[0, 0]] - (-2.5f64).exp()).abs() < 1e-15);
        let z = expm_dense(&Array2::zeros((3, 3))).unwrap();
        assert_eq!(z, Array2::<f64>::eye(3));
    }

    #[test]
    fn rotation_generator() {
        let e = expm_dense(&array![[0.0, 3.0], [-3.0, 0.0]]).unwrap();
        assert!((e[[0, 0]] - 3f64.cos()).abs() < 1e-14);
        assert!((e[[0, 1]] - 3f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn overflowing_norm() {
        assert!(expm_dense(&array![[f64::INFINITY]]).is_err());
    }
}
