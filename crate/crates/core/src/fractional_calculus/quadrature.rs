//! Gauss-Legendre rules and their composite / log-substituted variants.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// `s = e^u` with Gauss-Legendre panels in `u`.
    LogGaussLegendre,
    /// Composite Gauss-Legendre after mapping the half-line to a finite range.
    HalfLineComposite,
}

/// `sum_q weights[q] f(nodes[q]) ~ int f(s) ds` over `range`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: QuadratureKind,
    pub range: (f64, f64),
}

/// Nodes and weights of the `order`-point rule on `[-1, 1]`, ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_n, then P_n' from P_n and P_{n-1}
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite rule on `[a, b]` with panels no wider than `width`.
pub fn composite_gauss_legendre(a: f64, b: f64, width: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = (((b - a) / width).ceil() as usize).max(1);
    let step = (b - a) / panels as f64;
    let (gx, gw) = gauss_legendre(order);
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * step;
        let mid = lo + 0.5 * step;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(mid + 0.5 * step * x);
            ws.push(0.5 * step * w);
        }
    }
    (xs, ws)
}

impl QuadratureRule {
    /// Rule on `[e^{u_lo}, e^{u_hi}]` built from panels in `u = ln s`.
    pub fn log_substituted(u_lo: f64, u_hi: f64, width: f64, order: usize) -> Result<Self> {
        if !(u_lo.is_finite() && u_hi.is_finite() && u_hi > u_lo) {
            return Err(Error::Quadrature(format!("empty log range [{u_lo}, {u_hi}]")));
        }
        let (us, ws) = composite_gauss_legendre(u_lo, u_hi, width, order);
        let nodes: Vec<f64> = us.iter().map(|u| u.exp()).collect();
        let weights = ws.iter().zip(&nodes).map(|(w, s)| w * s).collect();
        Ok(Self {
            nodes,
            weights,
            kind: QuadratureKind::LogGaussLegendre,
            range: (u_lo.exp(), u_hi.exp()),
        })
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(s, w)| w * f(*s)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
