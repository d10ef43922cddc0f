//! Explicit conservative stepping for `∂ₜv = Σᵢ ∂ᵢ(|∂ᵢu|^{pᵢ−2}∂ᵢu)`,
//! `v = |u|^{α−1}u`, on a truncated box with zero exterior.
//!
//! Fluxes live on cell faces (forward differences of `u`), the update is the
//! backward-differenced divergence, so `Σ v·Πhᵢ` changes only through the
//! boundary faces. The run-validity rule keeps those faces at zero flux.
//!
//! Only the bounding box of nonzero `v`, padded by one cell, is swept.

use serde::{Deserialize, Serialize};

use crate::diagnostics::TimeSeriesRecord;
use crate::error::SolverError;
use crate::grid::{pairwise_sum_by, GridFunction, GridSpec};
use crate::kernels::{spow, SignedPow};
use crate::params::Anisotropy;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub anis: Anisotropy,
    /// Axes in user order, matching `anis.p_user()`.
    pub grid: GridSpec,
    pub cfl: f64,
    /// Time attached to the initial datum.
    pub t_start: f64,
    pub t_end: f64,
    pub eps_grad: f64,
    pub record_every: usize,
    /// Absolute threshold for support tracking; `None` means `1e−10·‖u₀‖∞`.
    pub support_threshold: Option<f64>,
    pub dt_min: f64,
    pub snapshot_times: Vec<f64>,
}

pub const DEFAULT_CFL: f64 = 0.4;
pub const DEFAULT_DT_MIN: f64 = 1e-14;
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-10;

/// `ε = 0` when every `pᵢ ≥ 2`, else `1e−8` times the amplitude scale.
pub fn default_eps_grad(p: &[f64], amplitude: f64) -> f64 {
    if p.iter().any(|&pi| pi < 2.0) {
        1e-8 * amplitude.abs().max(f64::MIN_POSITIVE)
    } else {
        0.0
    }
}

impl SolverConfig {
    pub fn new(anis: Anisotropy, grid: GridSpec, t_end: f64) -> Self {
        let eps_grad = default_eps_grad(anis.p_sorted(), 1.0);
        Self {
            anis,
            grid,
            cfl: DEFAULT_CFL,
            t_start: 0.0,
            t_end,
            eps_grad,
            record_every: 1,
            support_threshold: None,
            dt_min: DEFAULT_DT_MIN,
            snapshot_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if self.grid.dim() != self.anis.dim() {
            return bad(format!(
                "grid has {} axes but {} exponents were given",
                self.grid.dim(),
                self.anis.dim()
            ));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !self.t_start.is_finite() || self.t_start < 0.0 {
            return bad(format!("t_start must be finite and nonnegative, got {}", self.t_start));
        }
        if !(self.t_end > self.t_start && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must exceed t_start = {}", self.t_end, self.t_start));
        }
        if !(self.eps_grad >= 0.0 && self.eps_grad.is_finite()) {
            return bad(format!("eps_grad must be finite and nonnegative, got {}", self.eps_grad));
        }
        if self.eps_grad == 0.0 && self.anis.p_sorted()[0] < 2.0 {
            return bad("eps_grad must be positive when some p_i < 2".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if let Some(th) = self.support_threshold {
            if !(th >= 0.0 && th.is_finite()) {
                return bad(format!("support_threshold must be finite and nonnegative, got {th}"));
            }
        }
        if !(self.dt_min > 0.0) {
            return bad(format!("dt_min must be positive, got {}", self.dt_min));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return bad("snapshot times must be sorted".into());
        }
        if let (Some(&a), Some(&b)) = (self.snapshot_times.first(), self.snapshot_times.last()) {
            if a < self.t_start || b > self.t_end {
                return bad(format!(
                    "snapshot times must lie in [{}, {}]",
                    self.t_start, self.t_end
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    /// `amplitude` on `Πᵢ[cᵢ − rᵢ, cᵢ + rᵢ]`.
    Box,
    /// `amplitude · Πᵢ ½(1 + cos(π dᵢ/rᵢ))` for `|dᵢ| < rᵢ`.
    CosineBump,
    /// `amplitude · exp(−Σᵢ (dᵢ/rᵢ)²)`, cut to zero where `Σᵢ (dᵢ/rᵢ)² > 36`.
    GaussianTruncated,
}

const GAUSSIAN_CUT: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDatum {
    pub kind: DatumKind,
    pub amplitude: f64,
    pub radii: Vec<f64>,
    pub center: Vec<f64>,
}

impl InitialDatum {
    pub fn centered(kind: DatumKind, amplitude: f64, radii: &[f64]) -> Self {
        Self {
            kind,
            amplitude,
            radii: radii.to_vec(),
            center: vec![0.0; radii.len()],
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d = x.iter().zip(&self.center).map(|(a, c)| a - c);
        match self.kind {
            DatumKind::Box => {
                if d.zip(&self.radii).all(|(di, r)| di.abs() <= *r) {
                    self.amplitude
                } else {
                    0.0
                }
            }
            DatumKind::CosineBump => {
                let mut prod = self.amplitude;
                for (di, r) in d.zip(&self.radii) {
                    if di.abs() >= *r {
                        return 0.0;
                    }
                    prod *= 0.5 * (1.0 + (std::f64::consts::PI * di / r).cos());
                }
                prod
            }
            DatumKind::GaussianTruncated => {
                let q: f64 = d.zip(&self.radii).map(|(di, r)| (di / r) * (di / r)).sum();
                if q > GAUSSIAN_CUT * GAUSSIAN_CUT {
                    0.0
                } else {
                    self.amplitude * (-q).exp()
                }
            }
        }
    }

    /// Half-widths of the smallest centred box containing the support.
    pub fn support_radii(&self) -> Vec<f64> {
        match self.kind {
            DatumKind::GaussianTruncated => self.radii.iter().map(|r| GAUSSIAN_CUT * r).collect(),
            _ => self.radii.clone(),
        }
    }

    /// Largest support half-width `R₀`, so `supp u₀ ⊂ [−R₀, R₀]ᴺ` for a centred datum.
    pub fn r0(&self) -> f64 {
        self.support_radii()
            .iter()
            .zip(&self.center)
            .map(|(r, c)| r + c.abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, spec: &GridSpec) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if self.radii.len() != spec.dim() || self.center.len() != spec.dim() {
            return bad(format!("initial datum needs {} radii and center coordinates", spec.dim()));
        }
        if !self.amplitude.is_finite() {
            return bad("initial amplitude must be finite".into());
        }
        for (i, (r, c)) in self.support_radii().iter().zip(&self.center).enumerate() {
            if !(self.radii[i] > 0.0) || !c.is_finite() {
                return bad(format!("axis {}: radius must be positive", i + 1));
            }
            let collar = 4.0 * spec.spacing()[i];
            if c.abs() + r + collar > spec.half_length()[i] {
                return bad(format!(
                    "axis {}: initial support reaches within 4 cells of the boundary",
                    i + 1
                ));
            }
        }
        Ok(())
    }

    pub fn sample(&self, spec: &GridSpec) -> GridFunction {
        GridFunction::from_fn(spec.clone(), |x| self.value(x))
    }
}

/// Per-axis flux data: `F = w(s)·s`, `w(s) = (s² + ε²)^{(p−2)/2}`.
#[derive(Debug, Clone)]
struct AxisFlux {
    inv_h: f64,
    /// `max(1, p−1)/h²`, the linearised diffusivity factor.
    coef: f64,
    w_zero: f64,
    eps2: f64,
    pow: SignedPow,
    regularised: bool,
}

impl AxisFlux {
    fn new(p: f64, h: f64, eps: f64) -> Self {
        let regularised = eps > 0.0;
        let (pow, w_zero) = if regularised {
            let e = 0.5 * (p - 2.0);
            (SignedPow::new(e), (eps * eps).powf(e))
        } else {
            (SignedPow::new(p - 2.0), if p == 2.0 { 1.0 } else { 0.0 })
        };
        Self {
            inv_h: 1.0 / h,
            coef: (p - 1.0).max(1.0) / (h * h),
            w_zero,
            eps2: eps * eps,
            pow,
            regularised,
        }
    }

    #[inline(always)]
    fn weight(&self, s: f64) -> f64 {
        if s == 0.0 {
            self.w_zero
        } else if self.regularised {
            self.pow.abs_pow(s * s + self.eps2)
        } else {
            self.pow.abs_pow(s)
        }
    }
}

/// Axis-aligned index box `[lo, hi)` per axis; empty when any `lo ≥ hi`.
#[derive(Debug, Clone, PartialEq)]
struct IndexBox {
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl IndexBox {
    fn empty(dim: usize) -> Self {
        Self {
            lo: vec![usize::MAX; dim],
            hi: vec![0; dim],
        }
    }

    fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l >= h)
    }

    fn include(&mut self, axis: usize, idx: usize) {
        self.lo[axis] = self.lo[axis].min(idx);
        self.hi[axis] = self.hi[axis].max(idx + 1);
    }

    fn padded(&self, cells: &[usize]) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        Self {
            lo: self.lo.iter().map(|&l| l.saturating_sub(1)).collect(),
            hi: self.hi.iter().zip(cells).map(|(&h, &n)| (h + 1).min(n)).collect(),
        }
    }
}

/// A GFB1-ready snapshot of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub t: f64,
    /// The time that was requested; `t` is the nearest accepted step.
    pub requested: f64,
    pub u: GridFunction,
}

/// Explicit time stepper holding `v` and `u = |v|^{1/α−1}v`.
#[derive(Debug, Clone)]
pub struct Stepper {
    cfg: SolverConfig,
    alpha: f64,
    dim: usize,
    cells: Vec<usize>,
    strides: Vec<usize>,
    axes: Vec<AxisFlux>,
    inv_alpha: SignedPow,
    v: Vec<f64>,
    u: Vec<f64>,
    flux: Vec<Vec<f64>>,
    acc: Vec<f64>,
    nonzero: IndexBox,
    above: IndexBox,
    threshold: f64,
    linf0: f64,
    t: f64,
    steps: u64,
    pending_dt: Option<(f64, bool)>,
}

impl Stepper {
    pub fn new(cfg: SolverConfig, datum: &InitialDatum) -> Result<Self, SolverError> {
        cfg.validate()?;
        datum.validate(&cfg.grid)?;
        let u0 = datum.sample(&cfg.grid);
        Self::from_u(cfg, u0)
    }

    /// Starts from sampled `u` values.
    pub fn from_u(cfg: SolverConfig, u0: GridFunction) -> Result<Self, SolverError> {
        cfg.validate()?;
        if u0.spec() != &cfg.grid {
            return Err(SolverError::Config("initial grid function does not match the configured grid".into()));
        }
        let alpha = cfg.anis.alpha();
        let dim = cfg.grid.dim();
        let p = cfg.anis.p_user();
        let axes = (0..dim)
            .map(|i| AxisFlux::new(p[i], cfg.grid.spacing()[i], cfg.eps_grad))
            .collect();
        let u = u0.into_values();
        let v: Vec<f64> = u.iter().map(|&x| spow(x, alpha)).collect();
        let n = u.len();
        let linf0 = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let threshold = cfg
            .support_threshold
            .unwrap_or(DEFAULT_RELATIVE_THRESHOLD * linf0);
        let mut s = Self {
            alpha,
            dim,
            cells: cfg.grid.cells().to_vec(),
            strides: cfg.grid.strides(),
            axes,
            inv_alpha: SignedPow::new(1.0 / alpha),
            v,
            u,
            flux: vec![vec![0.0; n]; dim],
            acc: vec![0.0; n],
            nonzero: IndexBox::empty(dim),
            above: IndexBox::empty(dim),
            threshold,
            linf0,
            t: cfg.t_start,
            steps: 0,
            pending_dt: None,
            cfg,
        };
        s.rescan_boxes();
        Ok(s)
    }

    fn rescan_boxes(&mut self) {
        let mut nz = IndexBox::empty(self.dim);
        let mut ab = IndexBox::empty(self.dim);
        for k in 0..self.v.len() {
            let nonzero = self.v[k] != 0.0;
            let above = self.u[k].abs() > self.threshold;
            if nonzero || above {
                let m = self.cfg.grid.multi_index(k);
                for (i, &mi) in m.iter().enumerate() {
                    if nonzero {
                        nz.include(i, mi);
                    }
                    if above {
                        ab.include(i, mi);
                    }
                }
            }
        }
        self.nonzero = nz;
        self.above = ab;
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn initial_linf(&self) -> f64 {
        self.linf0
    }

    pub fn v(&self) -> GridFunction {
        GridFunction::from_parts_unchecked(self.cfg.grid.clone(), self.v.clone())
    }

    pub fn u(&self) -> GridFunction {
        GridFunction::from_parts_unchecked(self.cfg.grid.clone(), self.u.clone())
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.cfg.t_end
    }

    /// Per-axis support half-width at the tracking threshold.
    pub fn support(&self) -> Vec<f64> {
        let spec = &self.cfg.grid;
        (0..self.dim)
            .map(|i| {
                if self.above.is_empty() {
                    0.0
                } else {
                    spec.center(i, self.above.lo[i])
                        .abs()
                        .max(spec.center(i, self.above.hi[i] - 1).abs())
                        + 0.5 * spec.spacing()[i]
                }
            })
            .collect()
    }

    /// `Σ v · Πhᵢ`.
    pub fn mass_v(&self) -> f64 {
        let v = &self.v;
        pairwise_sum_by(v.len(), &|k| v[k]) * self.cfg.grid.cell_volume()
    }

    pub fn record(&self, dt: f64) -> TimeSeriesRecord {
        let vol = self.cfg.grid.cell_volume();
        let u = &self.u;
        let q = SignedPow::new(self.alpha + 1.0);
        let l1 = pairwise_sum_by(u.len(), &|k| u[k].abs()) * vol;
        let la = (pairwise_sum_by(u.len(), &|k| q.abs_pow(u[k])) * vol).powf(1.0 / (self.alpha + 1.0));
        TimeSeriesRecord {
            step: self.steps,
            t: self.t,
            dt,
            mass_v: self.mass_v(),
            l1_u: l1,
            lalpha1_u: la,
            linf_u: u.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            supp: self.support(),
        }
    }

    fn check_validity(&self) -> Result<(), SolverError> {
        let supp = self.support();
        let spec = &self.cfg.grid;
        for i in 0..self.dim {
            let l = spec.half_length()[i];
            if supp[i] + 2.0 * spec.spacing()[i] >= l {
                return Err(SolverError::DomainExhausted {
                    t: self.t,
                    axis: i + 1,
                    halfwidth: supp[i],
                    half_length: l,
                });
            }
        }
        Ok(())
    }

    /// Calls `f(base, idx)` for every line of the box along the last axis;
    /// `base` is the flat index of the line's `idx[N−1] = 0` cell.
    fn for_each_line(b: &IndexBox, strides: &[usize], mut f: impl FnMut(usize, &[usize])) {
        let dim = b.lo.len();
        let mut idx = b.lo.clone();
        loop {
            let base: usize = (0..dim - 1).map(|i| idx[i] * strides[i]).sum();
            f(base, &idx);
            let mut i = dim - 1;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < b.hi[i] {
                    break;
                }
                idx[i] = b.lo[i];
            }
        }
    }

    /// Computes face fluxes and the stable time step without touching `v`.
    /// Returns `(dt, capped)`; `capped` marks a step shortened to hit `t_end`.
    pub fn prepare(&mut self) -> (f64, bool) {
        if let Some(p) = self.pending_dt {
            return p;
        }
        let remaining = self.cfg.t_end - self.t;
        let work = self.nonzero.padded(&self.cells);
        if work.is_empty() {
            self.pending_dt = Some((remaining, true));
            return (remaining, true);
        }
        let dim = self.dim;
        let last = dim - 1;
        let n_last = self.cells[last];
        let (lo_last, hi_last) = (work.lo[last], work.hi[last]);
        let alpha_one = self.alpha == 1.0;
        let inv_alpha = 1.0 / self.alpha;
        let mut cmax = 0.0f64;

        let Self {
            axes,
            u,
            v,
            flux,
            acc,
            strides,
            cells,
            ..
        } = self;

        // per line: (upper neighbour exists, upper neighbour in work box,
        // lower face on work-box edge, lower face is the domain boundary)
        let mut flags = vec![(false, false, false, false); dim];
        Self::for_each_line(&work, strides, |base, idx| {
            for i in 0..last {
                flags[i] = (
                    idx[i] + 1 < cells[i],
                    idx[i] + 1 < work.hi[i],
                    idx[i] == work.lo[i],
                    idx[i] == 0,
                );
            }
            for j in lo_last..hi_last {
                let k = base + j;
                flags[last] = (j + 1 < n_last, j + 1 < hi_last, j == lo_last, j == 0);
                let uk = u[k];
                let mut a = acc[k];
                for i in 0..dim {
                    let ax = &axes[i];
                    let (up, up_in, lo_edge, lo_ghost) = flags[i];
                    let st = strides[i];
                    let u_up = if up { u[k + st] } else { 0.0 };
                    let s = (u_up - uk) * ax.inv_h;
                    let w = ax.weight(s);
                    flux[i][k] = w * s;
                    let cw = ax.coef * w;
                    a += cw;
                    if up_in {
                        acc[k + st] += cw;
                    }
                    if lo_edge {
                        let s_lo = if lo_ghost { uk * ax.inv_h } else { 0.0 };
                        a += ax.coef * ax.weight(s_lo);
                    }
                }
                acc[k] = 0.0;
                let d = if alpha_one {
                    1.0
                } else if v[k] == 0.0 {
                    0.0
                } else {
                    inv_alpha * uk / v[k]
                };
                cmax = cmax.max(d * a);
            }
        });

        let dt_stable = if cmax > 0.0 { self.cfg.cfl / cmax } else { f64::INFINITY };
        let out = if dt_stable >= remaining {
            (remaining, true)
        } else {
            (dt_stable, false)
        };
        self.pending_dt = Some(out);
        out
    }

    /// Applies the prepared update with step `dt` (from [`Stepper::prepare`]).
    fn advance(&mut self, dt: f64) -> Result<(), SolverError> {
        let work = self.nonzero.padded(&self.cells);
        self.pending_dt = None;
        if work.is_empty() {
            self.t += dt;
            self.steps += 1;
            return Ok(());
        }
        let dim = self.dim;
        let last = dim - 1;
        let (lo_last, hi_last) = (work.lo[last], work.hi[last]);
        let threshold = self.threshold;
        let mut nz = IndexBox::empty(dim);
        let mut ab = IndexBox::empty(dim);
        let mut finite = true;

        let Self {
            axes,
            u,
            v,
            flux,
            strides,
            inv_alpha,
            ..
        } = self;

        let mut edge = vec![(false, false); dim];
        Self::for_each_line(&work, strides, |base, idx| {
            for i in 0..last {
                edge[i] = (idx[i] == work.lo[i], idx[i] == 0);
            }
            let mut first_nz = usize::MAX;
            let mut last_nz = 0;
            let mut first_ab = usize::MAX;
            let mut last_ab = 0;
            for j in lo_last..hi_last {
                let k = base + j;
                edge[last] = (j == lo_last, j == 0);
                let uk = u[k];
                let mut div = 0.0;
                for i in 0..dim {
                    let ax = &axes[i];
                    let (lo_edge, lo_ghost) = edge[i];
                    let f_lo = if !lo_edge {
                        flux[i][k - strides[i]]
                    } else if lo_ghost {
                        let s = uk * ax.inv_h;
                        ax.weight(s) * s
                    } else {
                        0.0
                    };
                    div += (flux[i][k] - f_lo) * ax.inv_h;
                }
                let vn = v[k] + dt * div;
                let un = inv_alpha.apply(vn);
                finite &= un.is_finite();
                v[k] = vn;
                u[k] = un;
                if vn != 0.0 {
                    first_nz = first_nz.min(j);
                    last_nz = j;
                }
                if un.abs() > threshold {
                    first_ab = first_ab.min(j);
                    last_ab = j;
                }
            }
            if first_nz != usize::MAX {
                for i in 0..last {
                    nz.include(i, idx[i]);
                }
                nz.include(last, first_nz);
                nz.include(last, last_nz);
            }
            if first_ab != usize::MAX {
                for i in 0..last {
                    ab.include(i, idx[i]);
                }
                ab.include(last, first_ab);
                ab.include(last, last_ab);
            }
        });

        self.nonzero = nz;
        self.above = ab;
        self.t += dt;
        self.steps += 1;
        if !finite {
            return Err(SolverError::NonFinite { t: self.t });
        }
        self.check_validity()
    }

    /// One accepted explicit step; returns the step size used.
    pub fn step(&mut self) -> Result<f64, SolverError> {
        let (dt, capped) = self.prepare();
        if !capped && dt < self.cfg.dt_min {
            self.pending_dt = None;
            return Err(SolverError::StiffnessFloor {
                t: self.t,
                dt,
                dt_min: self.cfg.dt_min,
            });
        }
        self.advance(dt)?;
        if capped {
            // absorb rounding so that t lands on t_end exactly
            self.t = self.cfg.t_end;
        }
        Ok(dt)
    }
}

/// Pure single step: returns `(v_next, dt)` for the state `v` under `cfg`.
pub fn step(v: &GridFunction, cfg: &SolverConfig) -> Result<(GridFunction, f64), SolverError> {
    let alpha = cfg.anis.alpha();
    let u = v.map(|x| crate::kernels::u_from_v(x, alpha));
    let mut s = Stepper::from_u(cfg.clone(), u)?;
    // the pure form reports exhaustion only through the caller's own checks
    let (dt, capped) = s.prepare();
    if !capped && dt < cfg.dt_min {
        return Err(SolverError::StiffnessFloor {
            t: s.t,
            dt,
            dt_min: cfg.dt_min,
        });
    }
    match s.advance(dt) {
        Ok(()) | Err(SolverError::DomainExhausted { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok((s.v(), dt))
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TimeSeriesRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Why the run stopped early, if it did. Records and snapshots up to that
    /// point are kept.
    pub abort: Option<SolverError>,
    pub steps: u64,
    pub t_final: f64,
    pub threshold: f64,
    pub initial_l1: f64,
    pub initial_linf: f64,
}

/// Runs to `t_end`, recording every `record_every` accepted steps (plus the
/// first and last state) and taking snapshots at the accepted step nearest to
/// each requested time.
pub fn run(cfg: SolverConfig, datum: &InitialDatum) -> Result<RunOutput, SolverError> {
    let stepper = Stepper::new(cfg, datum)?;
    Ok(run_stepper(stepper, |_| {}))
}

/// [`run`] from an existing stepper, calling `on_record` for each record as
/// it is produced.
pub fn run_stepper(mut s: Stepper, mut on_record: impl FnMut(&TimeSeriesRecord)) -> RunOutput {
    let every = s.cfg.record_every as u64;
    let times = s.cfg.snapshot_times.clone();
    let mut next_snap = 0;
    let mut snapshots = Vec::new();
    let mut records = Vec::new();
    let first = s.record(0.0);
    let initial_l1 = first.l1_u;
    on_record(&first);
    records.push(first);
    let mut last_dt = 0.0;
    let mut recorded_at = 0u64;
    let mut abort = None;

    let take = |s: &Stepper, requested: f64| Snapshot {
        step: s.steps,
        t: s.t,
        requested,
        u: s.u(),
    };

    if let Err(e) = s.check_validity() {
        abort = Some(e);
    }
    while abort.is_none() && !s.is_finished() {
        let (dt, _) = s.prepare();
        while next_snap < times.len() {
            let ts = times[next_snap];
            if ts <= s.t || (ts < s.t + dt && ts - s.t <= s.t + dt - ts) {
                snapshots.push(take(&s, ts));
                next_snap += 1;
            } else {
                break;
            }
        }
        match s.step() {
            Ok(dt) => last_dt = dt,
            Err(e) => {
                abort = Some(e);
                break;
            }
        }
        if s.steps.is_multiple_of(every) {
            let r = s.record(last_dt);
            on_record(&r);
            records.push(r);
            recorded_at = s.steps;
        }
    }
    if abort.is_none() {
        while next_snap < times.len() {
            snapshots.push(take(&s, times[next_snap]));
            next_snap += 1;
        }
    }
    if recorded_at != s.steps {
        let r = s.record(last_dt);
        on_record(&r);
        records.push(r);
    }
    RunOutput {
        records,
        snapshots,
        abort,
        steps: s.steps,
        t_final: s.t,
        threshold: s.threshold,
        initial_l1,
        initial_linf: s.linf0,
    }
}
