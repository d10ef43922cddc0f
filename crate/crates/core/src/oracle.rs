//! Exact solutions for the linear and isotropic-exponent limits, used to
//! measure the solver's error.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::OracleError;
use crate::grid::{pairwise_sum_by, GridFunction, GridSpec};
use crate::params::Anisotropy;
use crate::solver::{DatumKind, InitialDatum, SolverConfig, Stepper, DEFAULT_CFL};

/// `M (4πt)^{−N/2} exp(−|x|²/4t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernel {
    pub dim: usize,
    pub mass: f64,
}

impl HeatKernel {
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        self.mass * (4.0 * std::f64::consts::PI * t).powf(-0.5 * self.dim as f64) * (-r2 / (4.0 * t)).exp()
    }

    /// Truncated Gaussian datum equal to the kernel at `t0`.
    pub fn datum(&self, t0: f64) -> InitialDatum {
        let amp = self.value(&vec![0.0; self.dim], t0);
        InitialDatum::centered(DatumKind::GaussianTruncated, amp, &vec![(4.0 * t0).sqrt(); self.dim])
    }
}

/// Self-similar solution of `∂ₜu = Σᵢ ∂ᵢ(|∂ᵢu|^{p−2}∂ᵢu)` with one exponent
/// `p > 2` on every axis:
/// `u = t^{−N/λ} (C − k Σᵢ |xᵢ t^{−1/λ}|^{p/(p−1)})₊^{(p−1)/(p−2)}`,
/// `λ = N(p−2)+p`, `k = ((p−2)/p) λ^{−1/(p−1)}`.
///
/// The sum runs over the axes separately. The radially symmetric profile
/// with `|x|` in place of the sum solves the rotation-invariant
/// p-Laplacian instead and fails [`verify_residual`] for this operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barenblatt {
    pub dim: usize,
    pub p: f64,
    pub c: f64,
}

impl Barenblatt {
    pub fn new(dim: usize, p: f64, c: f64) -> Result<Self, OracleError> {
        if !(p > 2.0) || dim == 0 || !(c > 0.0) {
            return Err(OracleError::Config(format!(
                "self-similar profile needs p > 2, N ≥ 1 and C > 0 (p = {p}, N = {dim}, C = {c})"
            )));
        }
        Ok(Self { dim, p, c })
    }

    pub fn lambda(&self) -> f64 {
        self.dim as f64 * (self.p - 2.0) + self.p
    }

    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn m(&self) -> f64 {
        (self.p - 1.0) / (self.p - 2.0)
    }

    pub fn k(&self) -> f64 {
        (self.p - 2.0) / self.p * self.lambda().powf(-1.0 / (self.p - 1.0))
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let lam = self.lambda();
        let s = t.powf(-1.0 / lam);
        let q = self.q();
        let sum: f64 = x.iter().map(|xi| (xi * s).abs().powf(q)).sum();
        let base = self.c - self.k() * sum;
        if base <= 0.0 {
            0.0
        } else {
            t.powf(-(self.dim as f64) / lam) * base.powf(self.m())
        }
    }

    /// Half-width of the support along each axis at time `t`.
    pub fn front(&self, t: f64) -> f64 {
        t.powf(1.0 / self.lambda()) * (self.c / self.k()).powf(1.0 / self.q())
    }

    /// `∫u`, constant in time, via the Dirichlet integral
    /// `∫_{Σ|yᵢ|^q<1} (1 − Σ|yᵢ|^q)^m = (2Γ(1+1/q))^N Γ(m+1)/Γ(m+1+N/q)`.
    pub fn mass(&self) -> f64 {
        let (n, q, m) = (self.dim as f64, self.q(), self.m());
        let unit = (2.0 * gamma(1.0 + 1.0 / q)).powf(n) * gamma(m + 1.0) / gamma(m + 1.0 + n / q);
        self.c.powf(m + n / q) * self.k().powf(-n / q) * unit
    }

    /// The profile with the same `p` whose mass is `mass`.
    pub fn with_mass(&self, mass: f64) -> Self {
        let e = self.m() + self.dim as f64 / self.q();
        Self {
            c: self.c * (mass / self.mass()).powf(1.0 / e),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub steps: [f64; 2],
    /// Largest `|∂ₜu − Σᵢ∂ᵢ(|∂ᵢu|^{p−2}∂ᵢu)|` over the probe points, relative
    /// to the largest `|∂ₜu|`.
    pub relative: [f64; 2],
    pub points: usize,
    pub passed: bool,
}

pub const RESIDUAL_TOL: f64 = 1e-4;

/// Substitutes `profile` into the equation with centred differences of step
/// `δ` and `δ/2` at points well inside the support and checks that the
/// residual is small and shrinks at second order. Points avoid the
/// coordinate hyperplanes, where `|xᵢ|^{p/(p−1)}` is not twice
/// differentiable.
pub fn verify_residual(
    profile: impl Fn(&[f64], f64) -> f64,
    dim: usize,
    p: f64,
    t: f64,
    reach: f64,
) -> ResidualReport {
    let fracs = [-0.5, -0.3, -0.1, 0.15, 0.25, 0.45];
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dim {
        points = points
            .into_iter()
            .flat_map(|pt| {
                fracs.iter().map(move |f| {
                    let mut q = pt.clone();
                    q.push(f * reach);
                    q
                })
            })
            .collect();
    }
    let points: Vec<Vec<f64>> = points.into_iter().filter(|x| profile(x, t) > 0.0).collect();
    let residual_at = |delta: f64| -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for x in &points {
            let dt = (profile(x, t + delta) - profile(x, t - delta)) / (2.0 * delta);
            let u0 = profile(x, t);
            let mut div = 0.0;
            let mut y = x.clone();
            for i in 0..dim {
                y[i] = x[i] + delta;
                let up = (profile(&y, t) - u0) / delta;
                y[i] = x[i] - delta;
                let dn = (u0 - profile(&y, t)) / delta;
                y[i] = x[i];
                let flux = |s: f64| s.abs().powf(p - 2.0) * s;
                div += (flux(up) - flux(dn)) / delta;
            }
            worst = worst.max((dt - div).abs());
            scale = scale.max(dt.abs());
        }
        worst / scale
    };
    let steps = [2e-3 * reach, 1e-3 * reach];
    let relative = [residual_at(steps[0]), residual_at(steps[1])];
    let converging = relative[1] < 1e-10 || relative[0] / relative[1] > 3.0;
    ResidualReport {
        steps,
        relative,
        points: points.len(),
        passed: relative[1] < RESIDUAL_TOL && converging,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRun {
    pub cells: usize,
    pub steps: u64,
    pub t_start: f64,
    pub t_end: f64,
    /// `max|u − ũ| / max|ũ|`.
    pub linf_error: f64,
    /// `‖u − ũ‖₁ / ‖ũ‖₁`.
    pub l1_error: f64,
    /// Support half-width of the computed solution, per axis.
    pub support: Vec<f64>,
    /// Exact front, when the exact solution has one.
    pub exact_front: Option<f64>,
    /// Largest `|Rᵢ − front| / front`.
    pub support_error: Option<f64>,
    pub mass_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub which: String,
    pub residual: Option<ResidualReport>,
    pub runs: Vec<OracleRun>,
    /// `log₂(e_coarse/e_fine)·log(2)/log(n_fine/n_coarse)` between the first two runs.
    pub order_linf: Option<f64>,
    pub order_l1: Option<f64>,
}

fn order(a: &OracleRun, b: &OracleRun, e: impl Fn(&OracleRun) -> f64) -> f64 {
    (e(a) / e(b)).ln() / (b.cells as f64 / a.cells as f64).ln()
}

fn finish(which: &str, residual: Option<ResidualReport>, runs: Vec<OracleRun>) -> OracleReport {
    let (order_linf, order_l1) = match runs.as_slice() {
        [a, b, ..] => (Some(order(a, b, |r| r.linf_error)), Some(order(a, b, |r| r.l1_error))),
        _ => (None, None),
    };
    OracleReport {
        which: which.into(),
        residual,
        runs,
        order_linf,
        order_l1,
    }
}

fn compare(
    stepper: &Stepper,
    exact: impl Fn(&[f64]) -> f64,
    mass0: f64,
    front: Option<f64>,
) -> OracleRun {
    let u = stepper.u();
    let spec = u.spec();
    let reference = GridFunction::from_fn(spec.clone(), &exact);
    let n = spec.len();
    let diff = pairwise_sum_by(n, &|k| (u.values()[k] - reference.values()[k]).abs());
    let norm = pairwise_sum_by(n, &|k| reference.values()[k].abs());
    let max_diff = u
        .values()
        .iter()
        .zip(reference.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let max_ref = reference.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let support = stepper.support();
    let support_error = front.map(|f| support.iter().map(|r| (r - f).abs() / f).fold(0.0, f64::max));
    OracleRun {
        cells: spec.cells()[0],
        steps: stepper.steps(),
        t_start: stepper.config().t_start,
        t_end: stepper.t(),
        linf_error: max_diff / max_ref,
        l1_error: diff / norm,
        support,
        exact_front: front,
        support_error,
        mass_drift: ((stepper.mass_v() - mass0) / mass0).abs(),
    }
}

fn advance(mut s: Stepper) -> Result<Stepper, OracleError> {
    while !s.is_finished() {
        s.step()?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatSetup {
    pub dim: usize,
    pub half_length: f64,
    pub t0: f64,
    pub t1: f64,
    pub mass: f64,
    pub cfl: f64,
}

impl Default for HeatSetup {
    fn default() -> Self {
        Self {
            dim: 2,
            half_length: 8.0,
            t0: 0.05,
            t1: 0.5,
            mass: 1.0,
            cfl: DEFAULT_CFL,
        }
    }
}

/// Runs the `α = 1`, `p = 2` limit from the exact kernel at `t0` and compares
/// with the kernel at `t1` on each resolution.
pub fn heat_oracle(setup: &HeatSetup, resolutions: &[usize]) -> Result<OracleReport, OracleError> {
    let kernel = HeatKernel {
        dim: setup.dim,
        mass: setup.mass,
    };
    let anis = Anisotropy::new(1.0, &vec![2.0; setup.dim])?;
    let mut runs = Vec::new();
    for &n in resolutions {
        let grid = GridSpec::cube(setup.dim, setup.half_length, n)?;
        let mut cfg = SolverConfig::new(anis.clone(), grid, setup.t1);
        cfg.t_start = setup.t0;
        cfg.cfl = setup.cfl;
        let s = Stepper::new(cfg, &kernel.datum(setup.t0))?;
        let mass0 = s.mass_v();
        let s = advance(s)?;
        runs.push(compare(&s, |x| kernel.value(x, setup.t1), mass0, None));
    }
    Ok(finish("heat", None, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarenblattSetup {
    pub dim: usize,
    pub p: f64,
    pub c: f64,
    pub half_length: f64,
    pub t0: f64,
    pub t1: f64,
    pub cfl: f64,
}

impl Default for BarenblattSetup {
    fn default() -> Self {
        Self {
            dim: 2,
            p: 3.0,
            c: 1.0,
            half_length: 5.0,
            t0: 1.0,
            t1: 2.0,
            cfl: DEFAULT_CFL,
        }
    }
}

/// Verifies the profile against the equation, then runs from the sampled
/// profile at `t0` and compares at `t1` with the exact solution of the same
/// discrete mass.
pub fn barenblatt_oracle(setup: &BarenblattSetup, resolutions: &[usize]) -> Result<OracleReport, OracleError> {
    let base = Barenblatt::new(setup.dim, setup.p, setup.c)?;
    let t_mid = 0.5 * (setup.t0 + setup.t1);
    let residual = verify_residual(|x, t| base.value(x, t), setup.dim, setup.p, t_mid, base.front(t_mid));
    if !residual.passed {
        return Err(OracleError::Residual {
            relative: residual.relative[1],
            tolerance: RESIDUAL_TOL,
        });
    }
    let anis = Anisotropy::new(1.0, &vec![setup.p; setup.dim])?;
    let mut runs = Vec::new();
    for &n in resolutions {
        let grid = GridSpec::cube(setup.dim, setup.half_length, n)?;
        if base.front(setup.t1) + 4.0 * grid.spacing()[0] >= setup.half_length {
            return Err(OracleError::Config(format!(
                "front {} at t = {} leaves no collar in half-length {}",
                base.front(setup.t1),
                setup.t1,
                setup.half_length
            )));
        }
        let u0 = GridFunction::from_fn(grid.clone(), |x| base.value(x, setup.t0));
        let matched = base.with_mass(u0.integral());
        let mut cfg = SolverConfig::new(anis.clone(), grid, setup.t1);
        cfg.t_start = setup.t0;
        cfg.cfl = setup.cfl;
        let s = Stepper::from_u(cfg, u0)?;
        let mass0 = s.mass_v();
        let s = advance(s)?;
        runs.push(compare(
            &s,
            |x| matched.value(x, setup.t1),
            mass0,
            Some(matched.front(setup.t1)),
        ));
    }
    Ok(finish("barenblatt", Some(residual), runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn isotropic(b: &Barenblatt, x: &[f64], t: f64) -> f64 {
        let lam = b.lambda();
        let r: f64 = x.iter().map(|c| c * c).sum::<f64>().sqrt() * t.powf(-1.0 / lam);
        let base = b.c - b.k() * r.powf(b.q());
        if base <= 0.0 {
            0.0
        } else {
            t.powf(-(b.dim as f64) / lam) * base.powf(b.m())
        }
    }

    #[test]
    fn profile_constants_for_cubic_growth() {
        let b = Barenblatt::new(2, 3.0, 1.0).unwrap();
        assert_eq!(b.lambda(), 5.0);
        assert_eq!(b.m(), 2.0);
        assert_eq!(b.q(), 1.5);
        assert_relative_eq!(b.k(), 1.0 / (3.0 * 5f64.sqrt()), max_relative = 1e-15);
        assert!(Barenblatt::new(2, 2.0, 1.0).is_err());
    }

    #[test]
    fn separable_profile_passes_residual_check() {
        for (dim, p) in [(1, 3.0), (2, 3.0), (2, 4.0), (3, 2.5)] {
            let b = Barenblatt::new(dim, p, 1.0).unwrap();
            let rep = verify_residual(|x, t| b.value(x, t), dim, p, 1.5, b.front(1.5));
            assert!(rep.passed, "N={dim} p={p}: {rep:?}");
            assert!(rep.points > 0);
        }
    }

    #[test]
    fn radial_profile_fails_residual_check() {
        let b = Barenblatt::new(2, 3.0, 1.0).unwrap();
        let rep = verify_residual(|x, t| isotropic(&b, x, t), 2, 3.0, 1.5, b.front(1.5));
        assert!(!rep.passed);
        assert!(rep.relative[1] > 1e-2, "{rep:?}");
        // in one dimension the two forms coincide
        let b1 = Barenblatt::new(1, 3.0, 1.0).unwrap();
        let rep1 = verify_residual(|x, t| isotropic(&b1, x, t), 1, 3.0, 1.5, b1.front(1.5));
        assert!(rep1.passed);
    }

    #[test]
    fn mass_formula_matches_quadrature() {
        let b = Barenblatt::new(2, 3.0, 0.7).unwrap();
        let f = b.front(3.0);
        let spec = GridSpec::cube(2, 1.05 * f, 1024).unwrap();
        let g = GridFunction::from_fn(spec, |x| b.value(x, 1.0));
        assert_relative_eq!(g.integral(), b.mass(), max_relative = 1e-5);
        let m = b.with_mass(2.5);
        assert_relative_eq!(m.mass(), 2.5, max_relative = 1e-12);
        assert_relative_eq!(
            GridFunction::from_fn(g.spec().clone(), |x| b.value(x, 3.0)).integral(),
            b.mass(),
            max_relative = 1e-4
        );
    }

    #[test]
    fn heat_kernel_is_normalised() {
        let k = HeatKernel { dim: 2, mass: 2.0 };
        let spec = GridSpec::cube(2, 6.0, 256).unwrap();
        let g = GridFunction::from_fn(spec, |x| k.value(x, 0.3));
        assert_relative_eq!(g.integral(), 2.0, max_relative = 1e-12);
        let d = k.datum(0.3);
        assert_relative_eq!(d.value(&[0.4, -0.2]), k.value(&[0.4, -0.2], 0.3), max_relative = 1e-14);
    }

    #[test]
    fn small_heat_oracle_converges() {
        let setup = HeatSetup {
            half_length: 6.0,
            t0: 0.1,
            t1: 0.2,
            ..HeatSetup::default()
        };
        let rep = heat_oracle(&setup, &[32, 64]).unwrap();
        assert!(rep.runs[1].linf_error < rep.runs[0].linf_error);
        assert!(rep.order_linf.unwrap() > 1.5, "{rep:?}");
        assert!(rep.runs.iter().all(|r| r.mass_drift < 1e-12));
    }
}
