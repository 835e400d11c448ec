//! Run configuration: JSON file, flag overrides, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bound_checker::MAX_MARGIN;
use crate::discretization::{build_grid, BoundaryCondition, Grid1D};
use crate::error::{Error, Result};
use crate::measure_models::{DensityModel, Family, ModelSpec};

pub const DEFAULT_SEED: u64 = 0x6e6b_6c5f_7365_6564;
pub const DEFAULT_EPSILON: f64 = 0.5;
pub const DEFAULT_MARGIN: f64 = 0.25;
pub const DEFAULT_OUTPUT_DIR: &str = "nkl_out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BoundaryCondition>,
}

/// Configuration file as written by the user; every key optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub grid: Option<GridFile>,
    #[serde(default)]
    pub alpha_list: Option<Vec<f64>>,
    #[serde(default)]
    pub t_list: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub interior_margin: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RunConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config: cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub family: Option<Family>,
    pub beta: Option<f64>,
    pub a: Option<f64>,
    pub d: Option<u32>,
    pub k_cut: Option<f64>,
    pub l: Option<f64>,
    pub n: Option<usize>,
    pub bc: Option<BoundaryCondition>,
    pub alpha_list: Option<Vec<f64>>,
    pub t_list: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub interior_margin: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub l: f64,
    pub n: usize,
    pub bc: BoundaryCondition,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: DensityModel,
    pub grid: GridConfig,
    pub alpha_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub epsilon: f64,
    pub interior_margin: f64,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// Six log-spaced times on `[1e-3, 1e-2]`.
pub fn default_t_list() -> Vec<f64> {
    log_spaced(1e-3, 1e-2, 6)
}

pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| {
            if k == 0 {
                lo
            } else if k + 1 == count {
                hi
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Heavy tails need a long box; the exponential families underflow on one.
pub fn default_grid(family: Family) -> (f64, usize) {
    match family {
        Family::Cauchy => (40.0, 2001),
        _ => (8.0, 1601),
    }
}

fn check_flag_conflicts(o: &Overrides, family: Family) -> Result<()> {
    let fam = family.name();
    if o.beta.is_some() && family != Family::Cauchy {
        return Err(Error::Config(format!("beta: only the cauchy family takes beta (model is {fam})")));
    }
    if o.a.is_some() && !matches!(family, Family::ExpSmooth | Family::ExpPower) {
        return Err(Error::Config(format!("a: only the exponential families take a (model is {fam})")));
    }
    if o.k_cut.is_some() && family != Family::ExpPower {
        return Err(Error::Config(format!("K_cut: only exp-power takes K_cut (model is {fam})")));
    }
    Ok(())
}

fn tag(key: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Config(format!("{key}: {e}"))
}

impl RunConfig {
    pub fn resolve(file: RunConfigFile, o: &Overrides) -> Result<Self> {
        let mut spec = file.model.unwrap_or_default();
        if let Some(f) = o.family {
            if spec.family.is_some_and(|g| g != f) {
                // switching family from the command line drops the file's shape parameters
                spec = ModelSpec::default();
            }
            spec.family = Some(f);
        }
        let family = spec.family.unwrap_or(Family::Cauchy);
        check_flag_conflicts(o, family)?;
        if o.beta.is_some() {
            spec.beta = o.beta;
        }
        if o.a.is_some() {
            spec.a = o.a;
        }
        if o.d.is_some() {
            spec.d = o.d;
        }
        if o.k_cut.is_some() {
            spec.k_cut = o.k_cut;
        }
        let model = spec.build().map_err(tag("model"))?;

        let gf = file.grid.unwrap_or_default();
        let (l0, n0) = default_grid(family);
        let grid = GridConfig {
            l: o.l.or(gf.l).unwrap_or(l0),
            n: o.n.or(gf.n).unwrap_or(n0),
            bc: o.bc.or(gf.bc).unwrap_or_default(),
        };
        let cfg = RunConfig {
            model,
            grid,
            alpha_list: o.alpha_list.clone().or(file.alpha_list).unwrap_or_else(|| vec![0.5]),
            t_list: o.t_list.clone().or(file.t_list).unwrap_or_else(default_t_list),
            epsilon: o.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON),
            interior_margin: o.interior_margin.or(file.interior_margin).unwrap_or(DEFAULT_MARGIN),
            output_dir: o
                .output_dir
                .clone()
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            seed: o.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn defaults() -> Self {
        Self::resolve(RunConfigFile::default(), &Overrides::default()).expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        build_grid(self.grid.l, self.grid.n).map_err(tag("grid"))?;
        if self.alpha_list.is_empty() {
            return Err(Error::Config("alpha_list: must not be empty".into()));
        }
        if let Some(a) = self.alpha_list.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::Config(format!("alpha_list: entries must be positive (found {a})")));
        }
        if self.t_list.is_empty() {
            return Err(Error::Config("t_list: must not be empty".into()));
        }
        if let Some(t) = self.t_list.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::Config(format!("t_list: entries must be positive (found {t})")));
        }
        if self.t_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("t_list: must be strictly ascending".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon: must lie in (0, 1) (found {})", self.epsilon)));
        }
        if !(0.0..=MAX_MARGIN).contains(&self.interior_margin) {
            return Err(Error::Config(format!(
                "interior_margin: must lie in [0, {MAX_MARGIN}] (found {})",
                self.interior_margin
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        build_grid(self.grid.l, self.grid.n)
    }

    /// Canonical JSON of everything except the output directory.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of `canonical_json`.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `"0.25,0.5"` -> `[0.25, 0.5]`.
pub fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: `{}` is not a number", p.trim())))
        })
        .collect()
}
