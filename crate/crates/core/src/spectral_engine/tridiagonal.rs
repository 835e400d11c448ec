//! Implicit-shift QL for symmetric tridiagonal matrices.
//!
//! Eigenvectors are accumulated transposed: row `j` of `zt` is eigenvector
//! `j`, so each Givens rotation touches two contiguous rows.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 60;

/// Row-major `n x n` block whose row `k` is the k-th unit eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl EigenPairs {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

fn rotate(zt: &mut [f64], n: usize, i: usize, s: f64, c: f64) {
    let (lo, hi) = zt.split_at_mut((i + 1) * n);
    let a = &mut lo[i * n..];
    let b = &mut hi[..n];
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let f = *y;
        *y = s * *x + c * f;
        *x = c * *x - s * f;
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of the matrix with
/// diagonal `diag` and off-diagonal `sub`.
pub fn tridiagonal_eigen(diag: &[f64], sub: &[f64]) -> Result<EigenPairs> {
    let n = diag.len();
    if n == 0 || sub.len() + 1 != n {
        return Err(Error::LengthMismatch {
            expected: n.saturating_sub(1),
            found: sub.len(),
        });
    }
    if let Some(i) = diag.iter().chain(sub).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "tridiagonal matrix",
            index: i,
        });
    }
    let mut d = diag.to_vec();
    let mut e = sub.to_vec();
    e.push(0.0);
    let mut zt = vec![0.0; n * n];
    for i in 0..n {
        zt[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITERATIONS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: MAX_ITERATIONS,
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                rotate(&mut zt, n, i, s, c);
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        vectors.extend_from_slice(&zt[k * n..(k + 1) * n]);
    }
    Ok(EigenPairs { values, vectors, n })
}

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
pub fn count_below(diag: &[f64], sub: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for (i, d) in diag.iter().enumerate() {
        let off = if i == 0 { 0.0 } else { sub[i - 1] * sub[i - 1] };
        q = d - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue by bisection on the Sturm count.
pub fn eigenvalue_by_index(diag: &[f64], sub: &[f64], k: usize) -> Result<f64> {
    let n = diag.len();
    if n == 0 || sub.len() + 1 != n {
        return Err(Error::LengthMismatch {
            expected: n.saturating_sub(1),
            found: sub.len(),
        });
    }
    if k >= n {
        return Err(Error::InvalidInput(format!("eigenvalue index {k} out of range for n = {n}")));
    }
    if let Some(i) = diag.iter().chain(sub).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "tridiagonal matrix",
            index: i,
        });
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { sub[i - 1].abs() } else { 0.0 } + if i + 1 < n { sub[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let pad = f64::EPSILON * (lo.abs().max(hi.abs()) + 1.0);
    lo -= pad;
    hi += pad;
    while hi - lo > 2.0 * f64::EPSILON * (lo.abs() + hi.abs()) + f64::MIN_POSITIVE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(diag, sub, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
