//! TOML run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dnad_core::solver::{default_eps_grad, DatumKind, DEFAULT_CFL, DEFAULT_DT_MIN};
use dnad_core::{Anisotropy, GridSpec, InitialDatum, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub alpha: f64,
    /// Growth exponents in user axis order.
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_struct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub domain: Domain,
    pub init: Init,
    pub solver: Solver,
    #[serde(default)]
    pub snapshots: Snapshots,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub half_length: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Init {
    pub kind: DatumKind,
    pub amplitude: f64,
    pub radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grad: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    /// Absolute threshold; unset means `1e−10·‖u₀‖∞`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_threshold: Option<f64>,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

fn default_record_every() -> usize {
    1
}

fn default_dt_min() -> f64 {
    DEFAULT_DT_MIN
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshots {
    #[serde(default)]
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.check_shape()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.dim;
        let lens = [
            ("p", self.p.len()),
            ("domain.half_length", self.domain.half_length.len()),
            ("domain.cells", self.domain.cells.len()),
            ("init.radii", self.init.radii.len()),
            ("init.center", self.init.center.as_ref().map_or(n, Vec::len)),
        ];
        for (key, len) in lens {
            if len != n {
                bail!("{key} has {len} entries but dim = {n}");
            }
        }
        Ok(())
    }

    pub fn anisotropy(&self) -> Result<Anisotropy> {
        let mut a = Anisotropy::new(self.alpha, &self.p)?;
        if let Some(l) = self.lambda_struct {
            a = a.with_lambda_struct(l)?;
        }
        Ok(a)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(&self.domain.half_length, &self.domain.cells)?)
    }

    pub fn datum(&self) -> InitialDatum {
        InitialDatum {
            kind: self.init.kind,
            amplitude: self.init.amplitude,
            radii: self.init.radii.clone(),
            center: self.init.center.clone().unwrap_or_else(|| vec![0.0; self.dim]),
        }
    }

    /// Validated solver configuration and initial datum. Nothing large is
    /// allocated before both pass.
    pub fn build(&self) -> Result<(SolverConfig, InitialDatum)> {
        self.check_shape()?;
        let anis = self.anisotropy()?;
        let grid = self.grid()?;
        let datum = self.datum();
        datum.validate(&grid)?;
        let s = &self.solver;
        let mut cfg = SolverConfig::new(anis, grid, s.t_end);
        cfg.cfl = s.cfl;
        cfg.t_start = s.t_start;
        cfg.eps_grad = s.eps_grad.unwrap_or_else(|| default_eps_grad(&self.p, self.init.amplitude));
        cfg.record_every = s.record_every;
        cfg.dt_min = s.dt_min;
        cfg.support_threshold = s.support_threshold;
        cfg.snapshot_times = self.snapshots.times.clone();
        cfg.validate()?;
        Ok((cfg, datum))
    }
}
