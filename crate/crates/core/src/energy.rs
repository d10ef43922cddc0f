//! Discrete Caccioppoli energy inequality and the general test-function
//! formula evaluated on stored snapshots.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EnergyError;
use crate::grid::{restrict_to_cylinder, AnisotropicCube, Cylinder, GridSpec};
use crate::kernels::spow;
use crate::params::Anisotropy;
use crate::solver::Snapshot;

pub const MIN_SNAPSHOTS: usize = 8;

/// Quintic smoothstep `z³(10 − 15z + 6z²)`, C² at both ends.
#[inline]
pub fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * z * (10.0 + z * (6.0 * z - 15.0))
}

#[inline]
pub fn smoothstep_prime(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        30.0 * z * z * (1.0 - z) * (1.0 - z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSign {
    #[default]
    Plus,
    Minus,
}

fn default_plateau() -> f64 {
    0.5
}

fn default_ramp() -> f64 {
    0.5
}

/// One cut-off choice: `η(x) = Πₛ ηₛ(xₛ)^{pₛ}` on a box, a time ramp `φ`
/// and a level `k`.
///
/// `ηₛ = 1` on the inner `plateau` fraction of each half-extent and falls
/// to zero at the box face along a quintic. `φ` rises from zero at the
/// window start over the first `ramp` fraction of the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyProbe {
    pub center: Vec<f64>,
    pub extents: Vec<f64>,
    pub window: [f64; 2],
    pub level: f64,
    #[serde(default)]
    pub sign: LevelSign,
    #[serde(default = "default_plateau")]
    pub plateau: f64,
    #[serde(default = "default_ramp")]
    pub ramp: f64,
}

impl EnergyProbe {
    /// Probe on the intrinsic box `K_r` around `center`.
    pub fn intrinsic(center: &[f64], r: f64, p: &[f64], window: [f64; 2], level: f64) -> Self {
        let cube = AnisotropicCube::intrinsic(center, r, p);
        Self {
            center: cube.center,
            extents: cube.extents,
            window,
            level,
            sign: LevelSign::Plus,
            plateau: default_plateau(),
            ramp: default_ramp(),
        }
    }

    pub fn with_level(&self, level: f64) -> Self {
        Self {
            level,
            ..self.clone()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), EnergyError> {
        let bad = |m: String| Err(EnergyError::Probe(m));
        if self.center.len() != dim || self.extents.len() != dim {
            return bad(format!("centre and extents need {dim} entries"));
        }
        if self.extents.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return bad("extents must be positive".into());
        }
        if !(self.window[1] > self.window[0]) || !self.window[0].is_finite() {
            return bad(format!("window [{}, {}] is empty", self.window[0], self.window[1]));
        }
        if !(0.0..1.0).contains(&self.plateau) {
            return bad(format!("plateau must lie in [0, 1), got {}", self.plateau));
        }
        if !(self.ramp > 0.0 && self.ramp <= 1.0) {
            return bad(format!("ramp must lie in (0, 1], got {}", self.ramp));
        }
        if !self.level.is_finite() {
            return bad("level must be finite".into());
        }
        Ok(())
    }

    fn cylinder(&self) -> Cylinder {
        Cylinder {
            cube: AnisotropicCube {
                center: self.center.clone(),
                r: 0.0,
                extents: self.extents.clone(),
            },
            t_lo: self.window[0],
            t_hi: self.window[1],
        }
    }

    /// `(ηₛ, ηₛ')` at coordinate `x` on axis `s`.
    pub fn eta_axis(&self, s: usize, x: f64) -> (f64, f64) {
        let e = self.extents[s];
        let width = (1.0 - self.plateau) * e;
        let d = x - self.center[s];
        let z = (e - d.abs()) / width;
        if z <= 0.0 {
            return (0.0, 0.0);
        }
        (smoothstep(z), -d.signum() * smoothstep_prime(z) / width)
    }

    /// `(φ, φ')` at time `t`.
    pub fn phi(&self, t: f64) -> (f64, f64) {
        let len = self.ramp * (self.window[1] - self.window[0]);
        let z = (t - self.window[0]) / len;
        (smoothstep(z), smoothstep_prime(z) / len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyStatus {
    /// Every term vanishes: the level set is empty on the cylinder.
    Vacuous,
    Finite,
    /// Left side positive with a zero right side.
    ViolationCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub level: f64,
    pub sign: LevelSign,
    pub lhs_gradient: f64,
    pub lhs_sup: f64,
    pub rhs_level: f64,
    pub rhs_time: f64,
    pub ratio: Option<f64>,
    pub status: EnergyStatus,
    pub snapshots_used: usize,
}

/// Box of cells carrying the probe, widened by one cell below so forward
/// differences see the jump into the support.
struct ProbeBox {
    lo: Vec<usize>,
    shape: Vec<usize>,
    /// Per axis: `ηₛ` and `ηₛ'` at each box index.
    eta: Vec<Vec<f64>>,
    deta: Vec<Vec<f64>>,
    snapshots: std::ops::Range<usize>,
}

impl ProbeBox {
    fn new(spec: &GridSpec, times: &[f64], probe: &EnergyProbe) -> Result<Self, EnergyError> {
        probe.validate(spec.dim())?;
        let view = restrict_to_cylinder(spec, times, &probe.cylinder())?;
        let found = view.snapshots.len();
        if found < MIN_SNAPSHOTS {
            return Err(EnergyError::TooFewSnapshots {
                need: MIN_SNAPSHOTS,
                found,
            });
        }
        let mut lo = Vec::new();
        let mut shape = Vec::new();
        let mut eta = Vec::new();
        let mut deta = Vec::new();
        for (s, r) in view.ranges.iter().enumerate() {
            let a = r.start.saturating_sub(1);
            let b = r.end.max(a);
            lo.push(a);
            shape.push(b - a);
            let (e, d): (Vec<f64>, Vec<f64>) = (a..b).map(|k| probe.eta_axis(s, spec.center(s, k))).unzip();
            eta.push(e);
            deta.push(d);
        }
        Ok(Self {
            lo,
            shape,
            eta,
            deta,
            snapshots: view.snapshots,
        })
    }

    fn len(&self) -> usize {
        self.shape.iter().product()
    }

    fn local_strides(&self) -> Vec<usize> {
        let mut st = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            st[i] = st[i + 1] * self.shape[i + 1];
        }
        st
    }

    /// Visits every box cell with its local multi-index, local flat index
    /// and global flat index.
    fn for_each(&self, spec: &GridSpec, mut f: impl FnMut(&[usize], usize, usize)) {
        if self.len() == 0 {
            return;
        }
        let gs = spec.strides();
        let dim = self.shape.len();
        let mut idx = vec![0usize; dim];
        let mut local = 0usize;
        loop {
            let global: usize = (0..dim).map(|i| (self.lo[i] + idx[i]) * gs[i]).sum();
            f(&idx, local, global);
            local += 1;
            let mut i = dim;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < self.shape[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
    }

    /// `η` and, per axis `j`, `|∂ⱼη^{1/pⱼ}|^{pⱼ} = |ηⱼ'|^{pⱼ} Π_{s≠j} ηₛ^{pₛ}`.
    fn weights(&self, idx: &[usize], p: &[f64], cutoff: &mut [f64]) -> f64 {
        let dim = idx.len();
        let mut eta = 1.0;
        for s in 0..dim {
            eta *= self.eta[s][idx[s]].powf(p[s]);
        }
        for j in 0..dim {
            let dj = self.deta[j][idx[j]];
            cutoff[j] = if dj == 0.0 {
                0.0
            } else {
                let mut w = dj.abs().powf(p[j]);
                for s in (0..dim).filter(|&s| s != j) {
                    w *= self.eta[s][idx[s]].powf(p[s]);
                }
                w
            };
        }
        eta
    }
}

fn check_grids(snapshots: &[Snapshot]) -> Result<(&GridSpec, Vec<f64>), EnergyError> {
    let first = snapshots.first().ok_or(EnergyError::TooFewSnapshots {
        need: MIN_SNAPSHOTS,
        found: 0,
    })?;
    let spec = first.u.spec();
    if snapshots.iter().any(|s| s.u.spec() != spec) {
        return Err(EnergyError::MixedGrids);
    }
    if snapshots.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(EnergyError::Probe("snapshot times must increase".into()));
    }
    Ok((spec, snapshots.iter().map(|s| s.t).collect()))
}

/// Trapezoid rule over an increasing set of times.
fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Both sides of the energy inequality for one probe.
pub fn evaluate_energy(
    snapshots: &[Snapshot],
    probe: &EnergyProbe,
    anis: &Anisotropy,
) -> Result<EnergyReport, EnergyError> {
    let (spec, times) = check_grids(snapshots)?;
    let bx = ProbeBox::new(spec, &times, probe)?;
    let p = anis.p_user();
    let a = 0.5 * (anis.alpha() + 1.0);
    let k = probe.level;
    let ka = spow(k, a);
    let plus = probe.sign == LevelSign::Plus;
    // (u−k)± and (u^a − k^a)±, exactly zero off the level set
    let trunc = |u: f64| -> (f64, f64) {
        if plus && u > k {
            (u - k, spow(u, a) - ka)
        } else if !plus && u < k {
            (k - u, ka - spow(u, a))
        } else {
            (0.0, 0.0)
        }
    };
    let dim = spec.dim();
    let h = spec.spacing();
    let vol = spec.cell_volume();
    let ls = bx.local_strides();
    let n = bx.len();
    let used = &snapshots[bx.snapshots.clone()];
    let ts: Vec<f64> = used.iter().map(|s| s.t).collect();

    let per_snapshot: Vec<[f64; 4]> = used
        .par_iter()
        .map(|snap| {
            let u = snap.u.values();
            let (phi, dphi) = probe.phi(snap.t);
            let mut w = vec![0.0; n];
            let mut cutoff = vec![0.0; dim];
            let (mut sup_int, mut level_int, mut time_int) = (0.0, 0.0, 0.0);
            bx.for_each(spec, |idx, l, g| {
                let (d, e) = trunc(u[g]);
                if d == 0.0 && e == 0.0 {
                    return;
                }
                let eta = bx.weights(idx, &p, &mut cutoff);
                w[l] = d * eta;
                sup_int += e * e * eta;
                time_int += e * e * eta;
                for j in 0..dim {
                    if cutoff[j] > 0.0 {
                        level_int += d.powf(p[j]) * cutoff[j];
                    }
                }
            });
            let mut grad_int = 0.0;
            bx.for_each(spec, |idx, l, _| {
                for j in 0..dim {
                    let next = if idx[j] + 1 < bx.shape[j] { w[l + ls[j]] } else { 0.0 };
                    let diff = next - w[l];
                    if diff != 0.0 {
                        grad_int += (diff.abs() / h[j]).powf(p[j]);
                    }
                }
            });
            [
                grad_int * vol * phi,
                sup_int * vol * phi,
                level_int * vol * phi,
                time_int * vol * dphi.max(0.0),
            ]
        })
        .collect();

    let column = |c: usize| -> Vec<f64> { per_snapshot.iter().map(|r| r[c]).collect() };
    let lhs_gradient = trapezoid(&ts, &column(0));
    let lhs_sup = column(1).into_iter().fold(0.0, f64::max);
    let rhs_level = trapezoid(&ts, &column(2));
    let rhs_time = trapezoid(&ts, &column(3));
    let lhs = lhs_gradient + lhs_sup;
    let rhs = rhs_level + rhs_time;
    let (ratio, status) = if lhs == 0.0 && rhs == 0.0 {
        (None, EnergyStatus::Vacuous)
    } else if rhs == 0.0 {
        (None, EnergyStatus::ViolationCandidate)
    } else {
        (Some(lhs / rhs), EnergyStatus::Finite)
    };
    Ok(EnergyReport {
        level: k,
        sign: probe.sign,
        lhs_gradient,
        lhs_sup,
        rhs_level,
        rhs_time,
        ratio,
        status,
        snapshots_used: used.len(),
    })
}

/// Evaluates every probe; results keep the probe order.
pub fn evaluate_energy_many(
    snapshots: &[Snapshot],
    probes: &[EnergyProbe],
    anis: &Anisotropy,
) -> Vec<Result<EnergyReport, EnergyError>> {
    probes.par_iter().map(|p| evaluate_energy(snapshots, p, anis)).collect()
}

/// Largest finite ratio over a probe family: the empirical constant `Ĉ`.
pub fn fitted_constant(reports: &[EnergyReport]) -> Option<f64> {
    reports.iter().filter_map(|r| r.ratio).reduce(f64::max)
}

/// `true` when each left-side term is nonincreasing along reports sorted by
/// ascending level (plus sign) or descending level (minus sign).
pub fn lhs_monotone_in_level(reports: &[EnergyReport]) -> bool {
    let mut sorted: Vec<&EnergyReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.level.total_cmp(&b.level));
    if sorted.first().is_some_and(|r| r.sign == LevelSign::Minus) {
        sorted.reverse();
    }
    sorted.windows(2).all(|w| {
        let tol = |x: f64| 1e-12 * x.abs();
        w[1].lhs_gradient <= w[0].lhs_gradient + tol(w[0].lhs_gradient)
            && w[1].lhs_sup <= w[0].lhs_sup + tol(w[0].lhs_sup)
    })
}

/// Test-function families admitted by the general formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `f(s) = (s − k)₊`.
    Truncation { k: f64 },
    /// `f(s) = (s² + ε²)^{(μ−1)/2} s`.
    RegularizedPower { mu: f64, eps: f64 },
}

impl TestFunction {
    pub fn validate(&self) -> Result<(), EnergyError> {
        match *self {
            TestFunction::Truncation { k } if k.is_finite() => Ok(()),
            TestFunction::RegularizedPower { mu, eps } if mu > 0.0 && eps >= 0.0 && mu.is_finite() => Ok(()),
            other => Err(EnergyError::Probe(format!("unsupported test function {other:?}"))),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        match *self {
            TestFunction::Truncation { k } => (s - k).max(0.0),
            TestFunction::RegularizedPower { mu, eps } => {
                if s == 0.0 {
                    0.0
                } else if eps == 0.0 {
                    spow(s, mu)
                } else {
                    (s * s + eps * eps).powf(0.5 * (mu - 1.0)) * s
                }
            }
        }
    }

    pub fn f_prime(&self, s: f64) -> f64 {
        match *self {
            TestFunction::Truncation { k } => {
                if s > k {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::RegularizedPower { mu, eps } => {
                let q = s * s + eps * eps;
                if q == 0.0 {
                    if mu < 1.0 {
                        f64::INFINITY
                    } else if mu == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    q.powf(0.5 * (mu - 3.0)) * (mu * s * s + eps * eps)
                }
            }
        }
    }

    /// Lower limit of `G(τ) = ∫ g`, chosen so `G ≥ 0` and `G = 0` off the
    /// support of `f`.
    fn anchor(&self, alpha: f64) -> f64 {
        match *self {
            TestFunction::Truncation { k } => spow(k, alpha),
            TestFunction::RegularizedPower { .. } => 0.0,
        }
    }
}

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const G_PANELS: usize = 12;

/// `G(τ) = ∫_{anchor}^{τ} g(σ) dσ` with `g(σ) = f(|σ|^{1/α−1}σ)`, by
/// composite Gauss–Legendre on panels graded cubically towards the anchor.
pub fn g_integral(f: &TestFunction, alpha: f64, tau: f64) -> f64 {
    let a = f.anchor(alpha);
    if tau == a {
        return 0.0;
    }
    let g = |s: f64| f.f(spow(s, 1.0 / alpha));
    let len = tau - a;
    let edge = |j: usize| a + len * (j as f64 / G_PANELS as f64).powi(3);
    let mut total = 0.0;
    for j in 0..G_PANELS {
        let (x0, x1) = (edge(j), edge(j + 1));
        let mid = 0.5 * (x0 + x1);
        let half = 0.5 * (x1 - x0);
        let mut s = 0.0;
        for (x, w) in GL8_NODES.iter().zip(&GL8_WEIGHTS) {
            s += w * (g(mid - half * x) + g(mid + half * x));
        }
        total += s * half;
    }
    total
}

/// `max(2, maxᵢ (2(pᵢ−1))^{pᵢ−1})`: the constant produced by Young's
/// inequality for the prototype diagonal fluxes.
pub fn young_gamma(p: &[f64]) -> f64 {
    p.iter().map(|&pi| (2.0 * (pi - 1.0)).powf(pi - 1.0)).fold(2.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralFormulaReport {
    pub test_function: TestFunction,
    pub gamma: f64,
    pub t1: f64,
    pub t2: f64,
    /// `∫ηφ G(v(τ₂))`.
    pub g_final: f64,
    /// `(1/γ)∬ Σᵢ|∂ᵢu|^{pᵢ} f'(u) ηφ`.
    pub dissipation: f64,
    /// `γ∬ χ Σᵢ |f(u)|^{pᵢ} f'(u)^{1−pᵢ} |∂ᵢη^{1/pᵢ}|^{pᵢ} φ`.
    pub cutoff: f64,
    /// `∫ηφ G(v(τ₁))`.
    pub g_initial: f64,
    /// `∬ηφ' G(v)`.
    pub g_time: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `(rhs − lhs)/|rhs|`; zero when both sides vanish.
    pub slack: f64,
}

/// Both sides of the general test-function formula over the probe window.
/// The probe's level and sign are ignored.
pub fn general_formula_check(
    snapshots: &[Snapshot],
    f: &TestFunction,
    probe: &EnergyProbe,
    anis: &Anisotropy,
) -> Result<GeneralFormulaReport, EnergyError> {
    f.validate()?;
    let (spec, times) = check_grids(snapshots)?;
    let bx = ProbeBox::new(spec, &times, probe)?;
    let p = anis.p_user();
    let alpha = anis.alpha();
    let gamma = young_gamma(&p);
    let dim = spec.dim();
    let h = spec.spacing();
    let vol = spec.cell_volume();
    let gs = spec.strides();
    let cells = spec.cells();
    let used = &snapshots[bx.snapshots.clone()];
    let ts: Vec<f64> = used.iter().map(|s| s.t).collect();

    // per snapshot: ∫ηG, ∬-integrands of dissipation and cut-off terms
    let per_snapshot: Vec<[f64; 3]> = used
        .par_iter()
        .map(|snap| {
            let u = snap.u.values();
            let mut cutoff_w = vec![0.0; dim];
            let (mut g_int, mut diss, mut cut) = (0.0, 0.0, 0.0);
            bx.for_each(spec, |idx, _, g| {
                let eta = bx.weights(idx, &p, &mut cutoff_w);
                if eta == 0.0 && cutoff_w.iter().all(|&c| c == 0.0) {
                    return;
                }
                let ui = u[g];
                let fu = f.f(ui);
                let fp = f.f_prime(ui);
                if eta > 0.0 {
                    g_int += eta * g_integral(f, alpha, spow(ui, alpha));
                }
                let mut grad_nonzero = false;
                for j in 0..dim {
                    let next = if bx.lo[j] + idx[j] + 1 < cells[j] { u[g + gs[j]] } else { 0.0 };
                    let du = (next - ui) / h[j];
                    if du != 0.0 {
                        grad_nonzero = true;
                        if fp > 0.0 && eta > 0.0 {
                            diss += du.abs().powf(p[j]) * fp * eta;
                        }
                    }
                }
                if grad_nonzero && fu != 0.0 {
                    for j in 0..dim {
                        if cutoff_w[j] > 0.0 {
                            cut += fu.abs().powf(p[j]) * fp.powf(1.0 - p[j]) * cutoff_w[j];
                        }
                    }
                }
            });
            [g_int * vol, diss * vol, cut * vol]
        })
        .collect();

    let phis: Vec<(f64, f64)> = ts.iter().map(|&t| probe.phi(t)).collect();
    let last = per_snapshot.len() - 1;
    let g_final = phis[last].0 * per_snapshot[last][0];
    let g_initial = phis[0].0 * per_snapshot[0][0];
    let diss: Vec<f64> = per_snapshot.iter().zip(&phis).map(|(r, ph)| r[1] * ph.0).collect();
    let cut: Vec<f64> = per_snapshot.iter().zip(&phis).map(|(r, ph)| r[2] * ph.0).collect();
    let gt: Vec<f64> = per_snapshot.iter().zip(&phis).map(|(r, ph)| r[0] * ph.1).collect();
    let dissipation = trapezoid(&ts, &diss) / gamma;
    let cutoff = gamma * trapezoid(&ts, &cut);
    let g_time = trapezoid(&ts, &gt);
    let lhs = g_final + dissipation;
    let rhs = cutoff + g_initial + g_time;
    let slack = if rhs == 0.0 && lhs == 0.0 {
        0.0
    } else {
        (rhs - lhs) / rhs.abs()
    };
    Ok(GeneralFormulaReport {
        test_function: *f,
        gamma,
        t1: ts[0],
        t2: ts[last],
        g_final,
        dissipation,
        cutoff,
        g_initial,
        g_time,
        lhs,
        rhs,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridFunction, GridSpec};
    use crate::kernels::b_alpha;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn smoothstep_shape() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(-3.0), 0.0);
        assert_relative_eq!(smoothstep(0.5), 0.5, max_relative = 1e-15);
        let h = 1e-6;
        for z in [0.1, 0.37, 0.8] {
            let fd = (smoothstep(z + h) - smoothstep(z - h)) / (2.0 * h);
            assert_relative_eq!(fd, smoothstep_prime(z), max_relative = 1e-8);
        }
    }

    #[test]
    fn eta_profile_and_derivative() {
        let probe = EnergyProbe::intrinsic(&[0.0, 0.0], 0.25, &[2.0, 2.0], [0.0, 1.0], 0.0);
        assert_relative_eq!(probe.extents[0], 0.5);
        assert_eq!(probe.eta_axis(0, 0.1), (1.0, 0.0));
        assert_eq!(probe.eta_axis(0, 0.5).0, 0.0);
        assert_eq!(probe.eta_axis(1, -0.7), (0.0, 0.0));
        let h = 1e-7;
        for x in [-0.4, 0.3, 0.45] {
            let fd = (probe.eta_axis(0, x + h).0 - probe.eta_axis(0, x - h).0) / (2.0 * h);
            assert_relative_eq!(fd, probe.eta_axis(0, x).1, max_relative = 1e-6);
        }
        assert_eq!(probe.phi(0.0), (0.0, 0.0));
        assert_eq!(probe.phi(0.9).0, 1.0);
    }

    #[test]
    fn g_by_quadrature_matches_closed_forms() {
        for alpha in [0.3, 0.5, 0.8, 1.0] {
            let id = TestFunction::RegularizedPower { mu: 1.0, eps: 0.0 };
            for u in [0.2, 1.0, 3.5] {
                let g = g_integral(&id, alpha, spow(u, alpha));
                assert_relative_eq!(g, alpha / (alpha + 1.0) * u.powf(alpha + 1.0), max_relative = 1e-10);
            }
            let k = 0.7;
            let tr = TestFunction::Truncation { k };
            for u in [0.1, 0.7, 1.3, 4.0] {
                let g = g_integral(&tr, alpha, spow(u, alpha));
                let exact = if u > k { b_alpha(u, k, alpha) } else { 0.0 };
                assert!((g - exact).abs() <= 1e-11 * (1.0 + exact), "α={alpha} u={u}: {g} vs {exact}");
            }
        }
    }

    #[test]
    fn young_constant() {
        assert_eq!(young_gamma(&[2.0, 2.0]), 2.0);
        assert_relative_eq!(young_gamma(&[3.0]), 16.0);
        assert_relative_eq!(young_gamma(&[1.5, 2.5]), 3f64.powf(1.5));
    }

    fn bump_snapshots(n: usize) -> (Vec<Snapshot>, Anisotropy) {
        let anis = Anisotropy::new(0.5, &[2.2, 2.6]).unwrap();
        let spec = GridSpec::cube(2, 1.0, 32).unwrap();
        let snaps = (0..n)
            .map(|j| {
                let t = 0.1 + 0.1 * j as f64;
                let u = GridFunction::from_fn(spec.clone(), |x| {
                    let r2: f64 = x.iter().map(|c| c * c).sum::<f64>() / (0.3 + t);
                    (1.0 - r2).max(0.0) / (1.0 + t)
                });
                Snapshot {
                    step: j as u64,
                    t,
                    requested: t,
                    u,
                }
            })
            .collect();
        (snaps, anis)
    }

    #[test]
    fn vacuous_level_gives_exact_zeros() {
        let (snaps, anis) = bump_snapshots(10);
        let max_u = snaps.iter().flat_map(|s| s.u.values().iter().copied()).fold(0.0, f64::max);
        let probe = EnergyProbe::intrinsic(&[0.0, 0.0], 0.5, anis.p_user().as_slice(), [0.1, 1.0], max_u);
        let r = evaluate_energy(&snaps, &probe, &anis).unwrap();
        assert_eq!(r.status, EnergyStatus::Vacuous);
        assert_eq!([r.lhs_gradient, r.lhs_sup, r.rhs_level, r.rhs_time], [0.0; 4]);
        let gf = general_formula_check(&snaps, &TestFunction::Truncation { k: max_u }, &probe, &anis).unwrap();
        assert_eq!(gf.lhs, 0.0);
        assert!(gf.slack >= -1e-8);
    }

    #[test]
    fn level_sweep_is_monotone_and_finite() {
        let (snaps, anis) = bump_snapshots(10);
        let base = EnergyProbe::intrinsic(&[0.0, 0.0], 0.5, anis.p_user().as_slice(), [0.1, 1.0], 0.0);
        let probes: Vec<_> = [0.1, 0.3, 0.5, 0.7].iter().map(|f| base.with_level(f * 0.75)).collect();
        let reports: Vec<_> = evaluate_energy_many(&snaps, &probes, &anis)
            .into_iter()
            .map(Result::unwrap)
            .collect();
        assert!(reports.iter().all(|r| r.status == EnergyStatus::Finite));
        assert!(lhs_monotone_in_level(&reports));
        assert!(fitted_constant(&reports).unwrap().is_finite());
    }

    #[test]
    fn probe_errors() {
        let (snaps, anis) = bump_snapshots(5);
        let probe = EnergyProbe::intrinsic(&[0.0, 0.0], 0.5, anis.p_user().as_slice(), [0.1, 0.5], 0.1);
        assert!(matches!(
            evaluate_energy(&snaps, &probe, &anis),
            Err(EnergyError::TooFewSnapshots { need: 8, found: 5 })
        ));
        let outside = EnergyProbe::intrinsic(&[0.9, 0.0], 0.5, anis.p_user().as_slice(), [0.1, 0.5], 0.1);
        assert!(matches!(evaluate_energy(&snaps, &outside, &anis), Err(EnergyError::Grid(_))));
        let bad = TestFunction::RegularizedPower { mu: -1.0, eps: 0.0 };
        assert!(general_formula_check(&snaps, &bad, &probe, &anis).is_err());
    }

    #[test]
    fn probe_serde_defaults() {
        let json = r#"{"center":[0,0],"extents":[0.5,0.4],"window":[0.1,1.0],"level":0.2}"#;
        let p: EnergyProbe = serde_json::from_str(json).unwrap();
        assert_eq!(p.sign, LevelSign::Plus);
        assert_eq!(p.plateau, 0.5);
        assert!(serde_json::from_str::<EnergyProbe>(r#"{"center":[0],"extents":[1],"window":[0,1],"level":0,"typo":1}"#).is_err());
        let f: TestFunction = serde_json::from_str(r#"{"family":"regularized_power","mu":0.5,"eps":1e-6}"#).unwrap();
        assert_eq!(f, TestFunction::RegularizedPower { mu: 0.5, eps: 1e-6 });
    }

    proptest! {
        #[test]
        fn truncation_g_is_b_alpha(u in 0.0f64..5.0, k in 0.01f64..3.0, alpha in 0.1f64..1.0) {
            let g = g_integral(&TestFunction::Truncation { k }, alpha, spow(u, alpha));
            let exact = if u > k { b_alpha(u, k, alpha) } else { 0.0 };
            prop_assert!((g - exact).abs() <= 1e-9 * (1.0 + exact));
        }
    }
}
