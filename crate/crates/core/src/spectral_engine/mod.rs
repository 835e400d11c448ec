//! Full eigendecomposition of a discrete operator and its functional calculus.

mod expm;
mod tridiagonal;

pub use expm::{
    backward_error_series, expm_dense, matrix_exponential_oracle, taylor_backward_theta,
    MAX_ORACLE_SIZE, TAYLOR_DEGREE,
};
pub use tridiagonal::{count_below, eigenvalue_by_index, tridiagonal_eigen, EigenPairs, MAX_ITERATIONS};

use ndarray::{Array1, Array2, ArrayView1};

use crate::discretization::{check_len, DiscreteOperator};
use crate::error::{Error, Result};

/// Modes whose weight falls below this are dropped from kernel sums.
pub const MODE_CUTOFF: f64 = 1e-300;
/// Eigenvalues within this multiple of `eps ||S||` of zero are set to zero.
pub const ZERO_SNAP: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the weighted-orthonormal eigenfunction `phi_k`.
    pub eigenfunctions: Array2<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub t: f64,
    pub alpha: f64,
    pub values: Array2<f64>,
}

pub fn eigendecompose(op: &DiscreteOperator) -> Result<SpectralDecomposition> {
    let n = op.n();
    let pairs = tridiagonal_eigen(&op.diag, &op.sub)?;
    let snap = ZERO_SNAP * f64::EPSILON * op.spectral_bound();
    let eigenvalues = pairs
        .values
        .iter()
        .map(|&l| if l.abs() <= snap { 0.0 } else { l })
        .collect();
    let inv_sw: Vec<f64> = op.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut rows = pairs.vectors;
    for k in 0..n {
        for (v, s) in rows[k * n..(k + 1) * n].iter_mut().zip(&inv_sw) {
            *v *= s;
        }
    }
    // rows are modes; reversing axes makes column k = phi_k without copying
    let modes = Array2::from_shape_vec((n, n), rows).expect("square block");
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenfunctions: modes.reversed_axes(),
        weights: op.weights.clone(),
    })
}

fn eval_spectral<G: Fn(f64) -> f64>(g: &G, eigenvalues: &[f64]) -> Result<Vec<f64>> {
    eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let v = g(l);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    what: "spectral function",
                    index: k,
                })
            }
        })
        .collect()
}

/// `lambda^alpha` for a spectrum that may carry tiny negative roundoff.
pub fn fractional_power(lambda: f64, alpha: f64) -> f64 {
    if lambda <= 0.0 {
        0.0
    } else {
        lambda.powf(alpha)
    }
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn phi(&self, k: usize) -> ArrayView1<'_, f64> {
        self.eigenfunctions.column(k)
    }

    /// `<f, phi_k>` for every k.
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), f.len())?;
        let fw: Array1<f64> = f.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
        Ok(self.eigenfunctions.t().dot(&fw).to_vec())
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = ArrayView1::from(coeffs);
        self.eigenfunctions.dot(&c).to_vec()
    }

    pub fn weighted_norm2(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * a * w).sum()
    }

    pub fn apply_function<G: Fn(f64) -> f64>(&self, g: G, f: &[f64]) -> Result<Vec<f64>> {
        let gv = eval_spectral(&g, &self.eigenvalues)?;
        let c = self.coefficients(f)?;
        let gc: Vec<f64> = c.iter().zip(&gv).map(|(a, b)| a * b).collect();
        Ok(self.synthesize(&gc))
    }

    pub fn quadratic_form<G: Fn(f64) -> f64>(&self, g: G, f: &[f64]) -> Result<f64> {
        let gv = eval_spectral(&g, &self.eigenvalues)?;
        let c = self.coefficients(f)?;
        Ok(c.iter().zip(&gv).map(|(a, b)| a * a * b).sum())
    }

    /// `sum_k g(lambda_k) phi_k(x_i) phi_k(x_j)`, exactly symmetric.
    pub fn function_kernel<G: Fn(f64) -> f64>(&self, g: G) -> Result<Array2<f64>> {
        let all: Vec<usize> = (0..self.n()).collect();
        self.function_kernel_block(g, &all)
    }

    /// `function_kernel` restricted to rows and columns `index`.
    pub fn function_kernel_block<G: Fn(f64) -> f64>(&self, g: G, index: &[usize]) -> Result<Array2<f64>> {
        if let Some(&i) = index.iter().find(|&&i| i >= self.n()) {
            return Err(Error::InvalidInput(format!("grid index {i} out of range")));
        }
        let gv = eval_spectral(&g, &self.eigenvalues)?;
        let keep: Vec<usize> = (0..self.n()).filter(|&k| gv[k].abs() >= MODE_CUTOFF).collect();
        let m = keep.len();
        let b = index.len();
        let mut left = Array2::<f64>::zeros((m, b));
        let mut right = Array2::<f64>::zeros((m, b));
        for (r, &k) in keep.iter().enumerate() {
            let col = self.eigenfunctions.column(k);
            for (c, &i) in index.iter().enumerate() {
                left[[r, c]] = col[i];
                right[[r, c]] = col[i] * gv[k];
            }
        }
        let mut p = left.t().dot(&right);
        for i in 0..b {
            for j in 0..i {
                p[[i, j]] = p[[j, i]];
            }
        }
        Ok(p)
    }

    /// `g(S)` in the symmetrized coordinates, `W^{1/2} P W^{1/2}`.
    pub fn symmetric_function_matrix<G: Fn(f64) -> f64>(&self, g: G) -> Result<Array2<f64>> {
        let mut p = self.function_kernel(g)?;
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        for ((i, j), v) in p.indexed_iter_mut() {
            *v *= sw[i] * sw[j];
        }
        Ok(p)
    }

    /// Kernel of `exp(-t A^alpha)` with respect to the weighted measure.
    pub fn kernel(&self, t: f64, alpha: f64) -> Result<KernelMatrix> {
        if !(t > 0.0 && t.is_finite() && alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel needs t > 0 and alpha > 0 (t = {t}, alpha = {alpha})"
            )));
        }
        let values = self.function_kernel(|l| (-t * fractional_power(l, alpha)).exp())?;
        Ok(KernelMatrix { t, alpha, values })
    }
}

pub fn kernel(dec: &SpectralDecomposition, t: f64, alpha: f64) -> Result<KernelMatrix> {
    dec.kernel(t, alpha)
}

pub fn apply_function<G: Fn(f64) -> f64>(dec: &SpectralDecomposition, g: G, f: &[f64]) -> Result<Vec<f64>> {
    dec.apply_function(g, f)
}

pub fn quadratic_form<G: Fn(f64) -> f64>(dec: &SpectralDecomposition, g: G, f: &[f64]) -> Result<f64> {
    dec.quadratic_form(g, f)
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// `T(t) f (x_i) = sum_j p_ij w_j f_j`.
    pub fn apply(&self, weights: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), f.len())?;
        check_len(self.n(), weights.len())?;
        let fw: Array1<f64> = f.iter().zip(weights).map(|(a, w)| a * w).collect();
        Ok(self.values.dot(&fw).to_vec())
    }

    pub fn row_masses(&self, weights: &[f64]) -> Result<Vec<f64>> {
        self.apply(weights, &vec![1.0; self.n()])
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
