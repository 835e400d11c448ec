//! Reference densities on the line and their closed-form Lyapunov data.
//!
//! Every family is written in terms of `l = log rho`. With `V = rho^{-1/2}`
//! the drift operator `A = -D^2 - l' D` satisfies `-AV/V = -l'^2/4 - l''/2`
//! in one dimension; the closed forms below carry the dimension parameter
//! `d` where the multidimensional Laplacian would put it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this radius `|x|` is clamped when evaluating `|x|^p` with `p < 2`.
const ORIGIN_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Cauchy,
    #[serde(alias = "expsmooth", alias = "exp_smooth")]
    ExpSmooth,
    #[serde(alias = "exppower", alias = "exp_power")]
    ExpPower,
    Gauss,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Cauchy => "cauchy",
            Family::ExpSmooth => "exp-smooth",
            Family::ExpPower => "exp-power",
            Family::Gauss => "gauss",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "cauchy" => Ok(Family::Cauchy),
            "exp-smooth" | "expsmooth" => Ok(Family::ExpSmooth),
            "exp-power" | "exppower" => Ok(Family::ExpPower),
            "gauss" | "gaussian" => Ok(Family::Gauss),
            other => Err(Error::InvalidModel(format!("unknown family `{other}`"))),
        }
    }
}

/// Anything that can be discretized: a positive density and the potential
/// of its ground-state (Schrodinger) transform.
pub trait Density {
    fn rho(&self, x: f64) -> f64;
    /// Potential `q` of `B f = -f'' + q f`.
    fn schrodinger_q(&self, x: f64) -> f64;
}

/// `rho = 1`. Test hook for the plain Laplacian.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlatDensity;

impl Density for FlatDensity {
    fn rho(&self, _x: f64) -> f64 {
        1.0
    }
    fn schrodinger_q(&self, _x: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub family: Family,
    pub beta: f64,
    pub a: f64,
    pub d: u32,
    #[serde(rename = "K_cut")]
    pub k_cut: f64,
}

/// JSON form of a model; absent keys take family defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(default, rename = "K_cut", skip_serializing_if = "Option::is_none")]
    pub k_cut: Option<f64>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<DensityModel> {
        let d = self.d.unwrap_or(1);
        match self.family.unwrap_or(Family::Cauchy) {
            Family::Cauchy => DensityModel::cauchy(self.beta.unwrap_or(2.0), d),
            Family::ExpSmooth => DensityModel::exp_smooth(self.a.unwrap_or(1.0), d),
            Family::ExpPower => DensityModel::exp_power(self.a.unwrap_or(2.0), d, self.k_cut),
            Family::Gauss => DensityModel::gauss(d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct ModelPointReport {
    pub x: f64,
    pub rho: f64,
    pub grad_log_rho: f64,
    pub V: f64,
    pub minus_AV_over_V: f64,
    /// `U = |rho'/rho|^2/4 - rho''/(2 rho)`; the Schrodinger operator is `-D^2 - U`.
    pub schrodinger_U: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub r: f64,
    pub s1: f64,
    pub s2: f64,
}

/// Smallest admissible cut radius for the `exp(-|x|^a)` family.
pub fn exp_power_threshold(a: f64, d: u32) -> f64 {
    (2.0 * (a + d as f64 - 2.0) / a).powf(1.0 / a)
}

impl DensityModel {
    pub fn cauchy(beta: f64, d: u32) -> Result<Self> {
        Self {
            family: Family::Cauchy,
            beta,
            a: 0.0,
            d,
            k_cut: 0.0,
        }
        .validated()
    }

    pub fn exp_smooth(a: f64, d: u32) -> Result<Self> {
        Self {
            family: Family::ExpSmooth,
            beta: 0.0,
            a,
            d,
            k_cut: 0.0,
        }
        .validated()
    }

    /// `k_cut = None` picks the threshold radius.
    pub fn exp_power(a: f64, d: u32, k_cut: Option<f64>) -> Result<Self> {
        let k_cut = k_cut.unwrap_or_else(|| exp_power_threshold(a, d));
        Self {
            family: Family::ExpPower,
            beta: 0.0,
            a,
            d,
            k_cut,
        }
        .validated()
    }

    pub fn gauss(d: u32) -> Result<Self> {
        Self {
            family: Family::Gauss,
            beta: 0.0,
            a: 2.0,
            d,
            k_cut: 0.0,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.d == 0 {
            return Err(Error::InvalidModel("d must be a positive integer".into()));
        }
        let d = self.d as f64;
        match self.family {
            Family::Cauchy => {
                if !(self.beta.is_finite() && self.beta > d) {
                    return Err(Error::InvalidModel(format!(
                        "cauchy requires beta > d (beta = {}, d = {})",
                        self.beta, self.d
                    )));
                }
            }
            Family::ExpSmooth => {
                if !(self.a > 0.0 && self.a < 2.0) {
                    return Err(Error::InvalidModel(format!(
                        "exp-smooth requires 0 < a < 2 (a = {})",
                        self.a
                    )));
                }
            }
            Family::ExpPower => {
                if !(self.a.is_finite() && self.a >= 2.0) {
                    return Err(Error::InvalidModel(format!(
                        "exp-power requires a >= 2 (a = {})",
                        self.a
                    )));
                }
                let thr = exp_power_threshold(self.a, self.d);
                // relative slack so the threshold itself round-trips through text
                if !(self.k_cut.is_finite() && self.k_cut >= thr * (1.0 - 1e-12)) {
                    return Err(Error::InvalidModel(format!(
                        "exp-power requires K_cut >= {thr} (K_cut = {})",
                        self.k_cut
                    )));
                }
            }
            Family::Gauss => {}
        }
        Ok(self)
    }

    fn d(&self) -> f64 {
        self.d as f64
    }

    fn abs_clamped(x: f64) -> f64 {
        x.abs().max(ORIGIN_CLAMP)
    }

    pub fn log_rho(&self, x: f64) -> f64 {
        match self.family {
            Family::Cauchy => -self.beta * (x * x).ln_1p(),
            Family::ExpSmooth => -(1.0 + x * x).powf(0.5 * self.a),
            Family::ExpPower => -x.abs().powf(self.a),
            Family::Gauss => -x * x,
        }
    }

    pub fn rho(&self, x: f64) -> f64 {
        match self.family {
            Family::Cauchy => (1.0 + x * x).powf(-self.beta),
            _ => self.log_rho(x).exp(),
        }
    }

    /// `(log rho)'`.
    pub fn grad_log_rho(&self, x: f64) -> f64 {
        let a = self.a;
        match self.family {
            Family::Cauchy => -2.0 * self.beta * x / (1.0 + x * x),
            Family::ExpSmooth => -a * x * (1.0 + x * x).powf(0.5 * a - 1.0),
            Family::ExpPower => -a * x.signum() * Self::abs_clamped(x).powf(a - 1.0),
            Family::Gauss => -2.0 * x,
        }
    }

    /// `(log rho)''`.
    pub fn log_rho_second(&self, x: f64) -> f64 {
        let a = self.a;
        match self.family {
            Family::Cauchy => {
                let s = 1.0 + x * x;
                -2.0 * self.beta * (1.0 - x * x) / (s * s)
            }
            Family::ExpSmooth => {
                let s = 1.0 + x * x;
                a * (2.0 - a) * s.powf(0.5 * (a - 4.0)) * x * x - a * s.powf(0.5 * (a - 2.0))
            }
            Family::ExpPower => a * (1.0 - a) * Self::abs_clamped(x).powf(a - 2.0),
            Family::Gauss => -2.0,
        }
    }

    /// `V = rho^{-1/2}`.
    pub fn lyapunov_v(&self, x: f64) -> f64 {
        1.0 / self.rho(x).sqrt()
    }

    /// The factor `m(x)` with `-AV = m V`.
    pub fn minus_av_over_v(&self, x: f64) -> f64 {
        let (a, d) = (self.a, self.d());
        match self.family {
            Family::Cauchy => {
                let s = 1.0 + x * x;
                let b = self.beta;
                b * d / s - b * (b + 2.0) * x * x / (s * s)
            }
            Family::ExpSmooth => {
                let s = 1.0 + x * x;
                0.5 * a * (a - 2.0) * s.powf(0.5 * (a - 4.0)) * x * x
                    + 0.5 * a * d * s.powf(0.5 * (a - 2.0))
                    - 0.25 * a * a * s.powf(a - 2.0) * x * x
            }
            Family::ExpPower => {
                let r = Self::abs_clamped(x);
                0.5 * a * (a + d - 2.0) * r.powf(a - 2.0) - 0.25 * a * a * r.powf(2.0 * a - 2.0)
            }
            Family::Gauss => d - x * x,
        }
    }

    /// Constant `c >= 0` with `-AV <= c V` everywhere.
    pub fn lyapunov_constant(&self) -> f64 {
        let (a, d) = (self.a, self.d());
        match self.family {
            Family::Cauchy => self.beta * d,
            Family::ExpSmooth => 0.5 * a * d,
            Family::ExpPower => 0.5 * a * (a + d - 2.0) * self.k_cut.powf(a - 2.0),
            Family::Gauss => d,
        }
    }

    /// Upper bound for `(log rho)''`.
    pub fn hessian_logrho_bound(&self) -> f64 {
        match self.family {
            Family::Cauchy => 4.0 * self.beta,
            Family::ExpSmooth => self.a * (2.0 - self.a),
            Family::ExpPower | Family::Gauss => 0.0,
        }
    }

    /// Potential `q = -U` of the ground-state transform `B = -D^2 + q`.
    pub fn schrodinger_potential(&self, x: f64) -> f64 {
        let (a, d) = (self.a, self.d());
        match self.family {
            Family::Cauchy => {
                let s = 1.0 + x * x;
                let b = self.beta;
                b * (b + 2.0) * x * x / (s * s) - b * d / s
            }
            Family::ExpSmooth => {
                let s = 1.0 + x * x;
                0.25 * a * a * s.powf(a - 2.0) * x * x
                    - 0.5 * a * (a - 2.0) * s.powf(0.5 * (a - 4.0)) * x * x
                    - 0.5 * a * d * s.powf(0.5 * (a - 2.0))
            }
            Family::ExpPower => {
                let r = Self::abs_clamped(x);
                -0.5 * a * (a + d - 2.0) * r.powf(a - 2.0) + 0.25 * a * a * r.powf(2.0 * a - 2.0)
            }
            Family::Gauss => x * x - d,
        }
    }

    /// `(ln s1, ln s2)` at radius r; does not underflow.
    pub fn decay_condition_log(&self, radii: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
        check_radii(radii)?;
        let dm1 = self.d() - 1.0;
        Ok(radii
            .iter()
            .map(|&r| {
                let base = 0.5 * self.log_rho(r) + dm1 * r.ln();
                (r, base, base + self.grad_log_rho(r).abs().ln())
            })
            .collect())
    }

    /// `s1 = rho^{1/2} r^{d-1}`, `s2 = |rho'| rho^{-1/2} r^{d-1}`.
    pub fn decay_condition_check(&self, radii: &[f64]) -> Result<Vec<DecayPoint>> {
        Ok(self
            .decay_condition_log(radii)?
            .into_iter()
            .map(|(r, l1, l2)| DecayPoint {
                r,
                s1: l1.exp(),
                s2: l2.exp(),
            })
            .collect())
    }

    pub fn point_report(&self, x: f64) -> Result<ModelPointReport> {
        if !x.is_finite() {
            return Err(Error::InvalidInput(format!("x = {x} is not finite")));
        }
        let rho = self.rho(x);
        let m = self.minus_av_over_v(x);
        let rep = ModelPointReport {
            x,
            rho,
            grad_log_rho: self.grad_log_rho(x),
            V: 1.0 / rho.sqrt(),
            minus_AV_over_V: m,
            schrodinger_U: -self.schrodinger_potential(x),
        };
        let vals = [rep.rho, rep.grad_log_rho, rep.V, rep.minus_AV_over_V, rep.schrodinger_U];
        if rho <= 0.0 || vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "model point report",
                index: 0,
            });
        }
        Ok(rep)
    }

    pub fn to_spec(&self) -> ModelSpec {
        let mut spec = ModelSpec {
            family: Some(self.family),
            d: Some(self.d),
            ..ModelSpec::default()
        };
        match self.family {
            Family::Cauchy => spec.beta = Some(self.beta),
            Family::ExpSmooth => spec.a = Some(self.a),
            Family::ExpPower => {
                spec.a = Some(self.a);
                spec.k_cut = Some(self.k_cut);
            }
            Family::Gauss => {}
        }
        spec
    }
}

impl Density for DensityModel {
    fn rho(&self, x: f64) -> f64 {
        DensityModel::rho(self, x)
    }
    fn schrodinger_q(&self, x: f64) -> f64 {
        self.schrodinger_potential(x)
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidInput("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("radii must be strictly increasing".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cauchy(beta: f64) -> DensityModel {
        DensityModel::cauchy(beta, 1).unwrap()
    }

    #[test]
    fn rho_values() {
        assert_eq!(cauchy(2.0).rho(0.0), 1.0);
        let m = cauchy(2.0);
        assert!((m.rho(1.0) - 0.25).abs() < 1e-15);
        assert!((m.log_rho(1.0).exp() - 0.25).abs() < 1e-15);
        let p = DensityModel::exp_power(2.0, 1, None).unwrap();
        assert_eq!(p.rho(0.0), 1.0);
    }

    #[test]
    fn minus_av_examples() {
        assert_eq!(cauchy(2.0).minus_av_over_v(0.0), 2.0);
        assert!((cauchy(2.0).minus_av_over_v(1.0) + 1.0).abs() < 1e-15);
        let p = DensityModel::exp_power(2.0, 1, None).unwrap();
        for x in [1.0, 2.0, 5.0, -3.0] {
            assert!(p.minus_av_over_v(x) <= 0.0);
        }
    }

    #[test]
    fn constants() {
        assert_eq!(cauchy(3.0).lyapunov_constant(), 3.0);
        assert_eq!(DensityModel::exp_smooth(1.0, 1).unwrap().lyapunov_constant(), 0.5);
        let p = DensityModel::exp_power(2.0, 1, Some(1.0)).unwrap();
        assert_eq!(p.lyapunov_constant(), 1.0);
        assert_eq!(cauchy(2.0).hessian_logrho_bound(), 8.0);
        assert_eq!(DensityModel::exp_smooth(1.0, 1).unwrap().hessian_logrho_bound(), 1.0);
        assert_eq!(DensityModel::exp_power(3.0, 1, None).unwrap().hessian_logrho_bound(), 0.0);
    }

    #[test]
    fn potentials() {
        assert_eq!(cauchy(2.0).schrodinger_potential(0.0), -2.0);
        let p = DensityModel::exp_power(2.0, 1, None).unwrap();
        assert!((p.schrodinger_potential(0.0) + 1.0).abs() < 1e-15);
        let g = DensityModel::gauss(1).unwrap();
        assert_eq!(g.schrodinger_potential(0.0), -1.0);
    }

    #[test]
    fn decay_examples() {
        let d = cauchy(2.0).decay_condition_check(&[10.0]).unwrap();
        assert!((d[0].s1 - 1.0 / 101.0).abs() < 1e-15);
        let p = DensityModel::exp_power(2.0, 1, None).unwrap();
        let d = p.decay_condition_check(&[5.0]).unwrap();
        assert!((d[0].s1 / (-12.5f64).exp() - 1.0).abs() < 1e-12);
        assert!(p.decay_condition_check(&[2.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_invalid() {
        assert!(DensityModel::cauchy(0.5, 1).is_err());
        assert!(DensityModel::cauchy(1.0, 1).is_err());
        assert!(DensityModel::exp_smooth(2.0, 1).is_err());
        assert!(DensityModel::exp_power(1.5, 1, None).is_err());
        assert!(DensityModel::exp_power(2.0, 1, Some(0.5)).is_err());
        assert!(DensityModel::cauchy(2.0, 0).is_err());
    }

    #[test]
    fn spec_json_rejects_unknown_keys() {
        let ok: ModelSpec = serde_json::from_str(r#"{"family":"cauchy","beta":3}"#).unwrap();
        assert_eq!(ok.build().unwrap().beta, 3.0);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"family":"cauchy","gamma":1}"#).is_err());
        let p: ModelSpec = serde_json::from_str(r#"{"family":"exp-power","a":3,"K_cut":2}"#).unwrap();
        assert_eq!(p.build().unwrap().k_cut, 2.0);
    }

    #[test]
    fn report_v_is_rho_power() {
        let r = cauchy(2.0).point_report(3.0).unwrap();
        assert_eq!(r.V, 1.0 / r.rho.sqrt());
        assert_eq!(r.schrodinger_U, r.minus_AV_over_V);
    }
}
