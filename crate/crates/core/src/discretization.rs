//! Three-point discretizations of `A f = -(rho f')'/rho` and of the flat
//! Schrodinger form `-f'' + q f` on a uniform grid of `[-L, L]`.
//!
//! Operators are stored through their symmetrization `S = W^{1/2} A_h W^{-1/2}`
//! where `W = diag(weights)`, so `S` is symmetric tridiagonal and `A_h` is
//! self-adjoint in the weighted inner product.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure_models::Density;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    #[default]
    Neumann,
    Dirichlet,
}

impl BoundaryCondition {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neumann" => Ok(Self::Neumann),
            "dirichlet" => Ok(Self::Dirichlet),
            other => Err(Error::Config(format!("bc: unknown boundary condition `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Neumann => "neumann",
            Self::Dirichlet => "dirichlet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorForm {
    /// Weighted `L^2(mu)` form.
    Divergence,
    /// Flat `L^2` form with a potential.
    Schrodinger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub l: f64,
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

pub fn build_grid(l: f64, n: usize) -> Result<Grid1D> {
    if n < 3 {
        return Err(Error::InvalidGrid(format!("n must be at least 3 (n = {n})")));
    }
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidGrid(format!("L must be positive (L = {l})")));
    }
    let m = (n - 1) as f64;
    // written so that nodes[i] = -nodes[n-1-i] exactly
    let nodes = (0..n)
        .map(|i| l * (2.0 * i as f64 - m) / m)
        .collect();
    Ok(Grid1D {
        l,
        n,
        h: 2.0 * l / m,
        nodes,
    })
}

impl Grid1D {
    /// Indices with `|x| <= (1 - margin) L`.
    pub fn interior(&self, margin: f64) -> Vec<usize> {
        let cut = (1.0 - margin) * self.l * (1.0 + 1e-12);
        (0..self.n).filter(|&i| self.nodes[i].abs() <= cut).collect()
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid1D,
    /// Subdiagonal of `S`.
    pub sub: Vec<f64>,
    /// Diagonal of `S`.
    pub diag: Vec<f64>,
    pub weights: Vec<f64>,
    pub bc: BoundaryCondition,
    pub form: OperatorForm,
}

fn sample_positive<D: Density + ?Sized>(density: &D, xs: impl Iterator<Item = f64>) -> Result<Vec<f64>> {
    xs.enumerate()
        .map(|(i, x)| {
            let r = density.rho(x);
            if !r.is_finite() {
                Err(Error::NonFinite { what: "rho", index: i })
            } else if r <= 0.0 {
                Err(Error::InvalidGrid(format!("density vanishes at x = {x}; shrink L")))
            } else {
                Ok(r)
            }
        })
        .collect()
}

pub fn assemble_divergence_form<D: Density + ?Sized>(
    density: &D,
    grid: &Grid1D,
    bc: BoundaryCondition,
) -> Result<DiscreteOperator> {
    let n = grid.n;
    let h = grid.h;
    let rho = sample_positive(density, grid.nodes.iter().copied())?;
    let mid = sample_positive(density, grid.nodes[..n - 1].iter().map(|x| x + 0.5 * h))?;

    let mut weights: Vec<f64> = rho.iter().map(|r| r * h).collect();
    // stiffness K = sum over edges of k_e (e_i - e_j)(e_i - e_j)^T
    let edge: Vec<f64> = mid.iter().map(|r| r / h).collect();
    let mut kdiag = vec![0.0; n];
    for (i, k) in edge.iter().enumerate() {
        kdiag[i] += k;
        kdiag[i + 1] += k;
    }
    match bc {
        BoundaryCondition::Neumann => {
            weights[0] *= 0.5;
            weights[n - 1] *= 0.5;
        }
        BoundaryCondition::Dirichlet => {
            let ghost = sample_positive(density, [grid.nodes[0] - 0.5 * h, grid.nodes[n - 1] + 0.5 * h].into_iter())?;
            kdiag[0] += ghost[0] / h;
            kdiag[n - 1] += ghost[1] / h;
        }
    }
    let diag = kdiag.iter().zip(&weights).map(|(k, w)| k / w).collect();
    let sub = edge
        .iter()
        .enumerate()
        .map(|(i, k)| -k / (weights[i] * weights[i + 1]).sqrt())
        .collect();
    Ok(DiscreteOperator {
        grid: grid.clone(),
        sub,
        diag,
        weights,
        bc,
        form: OperatorForm::Divergence,
    })
}

/// `tridiag(-1/h^2, 2/h^2 + q_i, -1/h^2)` with zero Dirichlet data and weights `h`.
pub fn assemble_schrodinger<D: Density + ?Sized>(density: &D, grid: &Grid1D) -> Result<DiscreteOperator> {
    let h2 = grid.h * grid.h;
    let diag = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let q = density.schrodinger_q(x);
            if q.is_finite() {
                Ok(2.0 / h2 + q)
            } else {
                Err(Error::NonFinite { what: "potential", index: i })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteOperator {
        grid: grid.clone(),
        sub: vec![-1.0 / h2; grid.n - 1],
        diag,
        weights: vec![grid.h; grid.n],
        bc: BoundaryCondition::Dirichlet,
        form: OperatorForm::Schrodinger,
    })
}

pub fn weighted_inner(f: &[f64], g: &[f64], op: &DiscreteOperator) -> Result<f64> {
    let n = op.n();
    check_len(n, f.len())?;
    check_len(n, g.len())?;
    Ok(f.iter().zip(g).zip(&op.weights).map(|((a, b), w)| a * b * w).sum())
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    /// `S g`.
    pub fn apply_symmetric(&self, g: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        check_len(n, g.len())?;
        let mut out: Vec<f64> = self.diag.iter().zip(g).map(|(d, x)| d * x).collect();
        for i in 0..n - 1 {
            out[i] += self.sub[i] * g[i + 1];
            out[i + 1] += self.sub[i] * g[i];
        }
        Ok(out)
    }

    /// `A_h f`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let sw = self.sqrt_weights();
        check_len(self.n(), f.len())?;
        let g: Vec<f64> = f.iter().zip(&sw).map(|(a, s)| a * s).collect();
        let sg = self.apply_symmetric(&g)?;
        Ok(sg.iter().zip(&sw).map(|(a, s)| a / s).collect())
    }

    /// `<A_h f, f>` in the weighted inner product.
    pub fn energy(&self, f: &[f64]) -> Result<f64> {
        check_len(self.n(), f.len())?;
        let g: Vec<f64> = f.iter().zip(&self.weights).map(|(a, w)| a * w.sqrt()).collect();
        let sg = self.apply_symmetric(&g)?;
        Ok(sg.iter().zip(&g).map(|(a, b)| a * b).sum())
    }

    pub fn norm2(&self, f: &[f64]) -> Result<f64> {
        weighted_inner(f, f, self)
    }

    /// Solves `(shift + S) z = rhs` by the Thomas algorithm.
    pub fn shifted_solve(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        check_len(n, rhs.len())?;
        let mut c = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut piv = self.diag[0] + shift;
        if piv == 0.0 || !piv.is_finite() {
            return Err(Error::SingularSolve { shift });
        }
        z[0] = rhs[0] / piv;
        for i in 1..n {
            c[i - 1] = self.sub[i - 1] / piv;
            piv = self.diag[i] + shift - self.sub[i - 1] * c[i - 1];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::SingularSolve { shift });
            }
            z[i] = (rhs[i] - self.sub[i - 1] * z[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            z[i] -= c[i] * z[i + 1];
        }
        Ok(z)
    }

    pub fn dense_symmetric(&self) -> Array2<f64> {
        let n = self.n();
        let mut s = Array2::zeros((n, n));
        for i in 0..n {
            s[[i, i]] = self.diag[i];
        }
        for i in 0..n - 1 {
            s[[i, i + 1]] = self.sub[i];
            s[[i + 1, i]] = self.sub[i];
        }
        s
    }

    /// Gershgorin bound on the spectrum of `S`.
    pub fn spectral_bound(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.sub[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.sub[i].abs() } else { 0.0 };
                self.diag[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_models::{DensityModel, FlatDensity};

    #[test]
    fn grid_examples() {
        let g = build_grid(1.0, 3).unwrap();
        assert_eq!(g.nodes, vec![-1.0, 0.0, 1.0]);
        assert_eq!(g.h, 1.0);
        assert_eq!(build_grid(20.0, 2001).unwrap().h, 0.02);
        assert!(build_grid(1.0, 2).is_err());
        assert!(build_grid(0.0, 5).is_err());
        let g = build_grid(40.0, 2001).unwrap();
        assert_eq!(g.nodes[0], -40.0);
        assert_eq!(g.nodes[2000], 40.0);
        assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn flat_three_point() {
        let g = build_grid(1.0, 3).unwrap();
        let op = assemble_divergence_form(&FlatDensity, &g, BoundaryCondition::Neumann).unwrap();
        assert_eq!(op.weights, vec![0.5, 1.0, 0.5]);
        // W^{1/2} S W^{1/2} is the hand-assembled stiffness matrix
        let k = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        let s = op.dense_symmetric();
        let sw = op.sqrt_weights();
        for i in 0..3 {
            for j in 0..3 {
                assert!((sw[i] * s[[i, j]] * sw[j] - k[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn neumann_constants_are_harmonic() {
        let m = DensityModel::cauchy(2.0, 1).unwrap();
        let g = build_grid(40.0, 2001).unwrap();
        let op = assemble_divergence_form(&m, &g, BoundaryCondition::Neumann).unwrap();
        let u = op.sqrt_weights();
        let su = op.apply_symmetric(&u).unwrap();
        assert!(su.iter().all(|v| v.abs() <= 1e-12), "{:e}", su.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        assert!(op.sub.iter().all(|s| *s <= 0.0));
    }

    #[test]
    fn thomas_matches_multiply() {
        let m = DensityModel::cauchy(2.0, 1).unwrap();
        let g = build_grid(8.0, 50).unwrap();
        let op = assemble_divergence_form(&m, &g, BoundaryCondition::Neumann).unwrap();
        let rhs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let z = op.shifted_solve(0.3, &rhs).unwrap();
        let back: Vec<f64> = op
            .apply_symmetric(&z)
            .unwrap()
            .iter()
            .zip(&z)
            .map(|(a, b)| a + 0.3 * b)
            .collect();
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_inner_length_mismatch() {
        let g = build_grid(1.0, 5).unwrap();
        let op = assemble_divergence_form(&FlatDensity, &g, BoundaryCondition::Neumann).unwrap();
        assert!(weighted_inner(&[1.0; 4], &[1.0; 5], &op).is_err());
        let total: f64 = op.weights.iter().sum();
        assert_eq!(weighted_inner(&[1.0; 5], &[1.0; 5], &op).unwrap(), total);
    }

    #[test]
    fn schrodinger_flat_is_dirichlet_laplacian() {
        let g = build_grid(1.0, 5).unwrap();
        let op = assemble_schrodinger(&FlatDensity, &g).unwrap();
        assert!(op.diag.iter().all(|d| *d == 2.0 / (g.h * g.h)));
        assert_eq!(op.bc, BoundaryCondition::Dirichlet);
    }
}
