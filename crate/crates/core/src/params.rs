//! Problem parameters and every exponent derived from them.
//!
//! [`Anisotropy`] is the single source of truth for `(N, α, p, Λ)`. The
//! growth exponents are stored sorted ascending; the permutation back to the
//! caller's axis order is kept so that per-axis reports stay in user order.

use serde::Serialize;

use crate::error::ParamError;

/// Relative tolerance used by [`check_sum_identities`].
pub const SUM_IDENTITY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anisotropy {
    alpha: f64,
    /// Exponents sorted ascending.
    p: Vec<f64>,
    /// `axis_of[k]` is the user axis carrying the k-th smallest exponent.
    axis_of: Vec<usize>,
    lambda_struct: f64,
}

impl Anisotropy {
    /// Validates `alpha ∈ (0, 1]` and `p_i > 1`, sorting the exponents.
    pub fn new(alpha: f64, p: &[f64]) -> Result<Self, ParamError> {
        if p.is_empty() {
            return Err(ParamError::EmptyExponents);
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ParamError::Alpha(alpha));
        }
        for (axis, &pi) in p.iter().enumerate() {
            if !(pi.is_finite() && pi > 1.0) {
                return Err(ParamError::Exponent { axis, value: pi });
            }
        }
        let mut axis_of: Vec<usize> = (0..p.len()).collect();
        axis_of.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
        let sorted = axis_of.iter().map(|&a| p[a]).collect();
        Ok(Self {
            alpha,
            p: sorted,
            axis_of,
            lambda_struct: 1.0,
        })
    }

    /// Sets the structure constant Λ (reported only, never used in exponents).
    pub fn with_lambda_struct(mut self, lambda: f64) -> Result<Self, ParamError> {
        if !(lambda.is_finite() && lambda >= 1.0) {
            return Err(ParamError::StructureConstant(lambda));
        }
        self.lambda_struct = lambda;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda_struct(&self) -> f64 {
        self.lambda_struct
    }

    /// Exponents sorted ascending, `p_1 ≤ … ≤ p_N`.
    pub fn p_sorted(&self) -> &[f64] {
        &self.p
    }

    /// Exponents in the order the caller supplied them.
    pub fn p_user(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p.len()];
        for (k, &axis) in self.axis_of.iter().enumerate() {
            out[axis] = self.p[k];
        }
        out
    }

    /// `axis_order()[k]` is the user axis holding the k-th smallest exponent.
    pub fn axis_order(&self) -> &[usize] {
        &self.axis_of
    }

    /// Reorders a per-sorted-index vector into user axis order.
    pub fn to_user_order(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; sorted.len()];
        for (k, &axis) in self.axis_of.iter().enumerate() {
            out[axis] = sorted[k];
        }
        out
    }
}

/// Regime classification of a parameter tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeFlags {
    /// `p̄ > N(α+1)/(N+α+1)`.
    pub supercritical: bool,
    /// Complement of `supercritical`; local bounds need extra integrability.
    pub subcritical: bool,
    /// `1 < p_i < p̄(1+(α+1)/N)` for every axis.
    pub boundedness_window: bool,
    /// `α+1 < p_1`, `p_N < p̄(1+α/N)` and `p̄(1+α/N) < N+α`.
    pub slow_diffusion: bool,
    /// `α+1 < p_j < p̄(1+(α+1)/N) < N+α+1` for every axis.
    pub rough_support: bool,
    /// `p̄(1+1/N) > α+1`.
    pub ultracontractive: bool,
}

/// Exponents of the qualitative compact-support estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoughSupportExponents {
    pub d: f64,
    pub chi: Vec<f64>,
    pub chi_min: f64,
    pub chi_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedExponents {
    pub dim: usize,
    pub alpha: f64,
    /// Sorted exponents the rest of the struct was computed from.
    pub p: Vec<f64>,
    pub p_bar: f64,
    /// Sobolev conjugate `N p̄/(N − p̄)`; `None` when `p̄ ≥ N`.
    pub p_bar_star: Option<f64>,
    /// `P = max{α+1, p_N}`.
    pub big_p: f64,
    /// `λ₁ = N(p̄ − (α+1)) + p̄`.
    pub lambda_1: f64,
    /// `N/λ₁`, decay rate of the L∞ bound.
    pub mass_decay_exponent: f64,
    /// `p̄/λ₁`, power of the initial L¹ mass in the L∞ bound.
    pub mass_gain_exponent: f64,
    /// `(N(p̄ − p_i) + p̄)/(λ₁ p_i)`, sorted-axis order.
    pub support_exponent: Vec<f64>,
    /// `p̄(p_i − α − 1)/(λ₁ p_i)`, sorted-axis order.
    pub support_mass_exponent: Vec<f64>,
    /// Integrability threshold `(N/p̄)(α+1−p̄)` for the subcritical range.
    pub m_threshold: f64,
    /// `P − (N/p̄)(p̄(1+(α+1)/N) − P)`.
    pub lambda_small: f64,
    pub flags: RegimeFlags,
    /// Present when `rough_support` holds and the denominators are positive.
    pub rough_support: Option<RoughSupportExponents>,
    /// Decay rate of self-similar solutions conserving `∫|u|^{α−1}u`:
    /// `N/(N(p̄−α−1) + α p̄)`. Coincides with `N/λ₁` at α = 1.
    pub conserved_decay_exponent: f64,
    /// Per-axis spreading rate of the same self-similar family.
    pub conserved_support_exponent: Vec<f64>,
}

impl DerivedExponents {
    /// `p̄_σ = p̄(1 + σ/N)`.
    pub fn p_bar_sigma(&self, sigma: f64) -> f64 {
        self.p_bar * (1.0 + sigma / self.dim as f64)
    }

    /// `λ_q = N(p̄ − (α+1)) + q p̄`.
    pub fn lambda_q(&self, q: f64) -> f64 {
        self.dim as f64 * (self.p_bar - (self.alpha + 1.0)) + q * self.p_bar
    }

    /// Exponent of the mean integral in the explicit local L∞ bound,
    /// `p̄ / (N(p̄(1+(α+1)/N) − P))`. `None` outside the boundedness window.
    pub fn local_bound_exponent(&self) -> Option<f64> {
        let n = self.dim as f64;
        let denom = n * (self.p_bar_sigma(self.alpha + 1.0) - self.big_p);
        (denom > 0.0).then(|| self.p_bar / denom)
    }

    /// Power of `(1 − σ)` in the explicit local L∞ bound.
    pub fn local_bound_shrink_power(&self) -> f64 {
        let p_n = *self.p.last().expect("non-empty exponents");
        -(p_n / self.p_bar) * (self.dim as f64 + self.p_bar)
    }
}

/// Computes every derived exponent and regime flag.
pub fn derive(a: &Anisotropy) -> DerivedExponents {
    let n = a.dim() as f64;
    let alpha = a.alpha();
    let p = a.p_sorted().to_vec();
    let p1 = p[0];
    let pn = *p.last().unwrap();

    let p_bar = n / p.iter().map(|pi| 1.0 / pi).sum::<f64>();
    let p_bar_star = (p_bar < n).then(|| n * p_bar / (n - p_bar));
    let big_p = (alpha + 1.0).max(pn);
    let lambda_1 = n * (p_bar - (alpha + 1.0)) + p_bar;

    let support_exponent = p
        .iter()
        .map(|&pi| (n * (p_bar - pi) + p_bar) / (lambda_1 * pi))
        .collect();
    let support_mass_exponent = p
        .iter()
        .map(|&pi| p_bar * (pi - alpha - 1.0) / (lambda_1 * pi))
        .collect();

    let sigma_alpha1 = p_bar * (1.0 + (alpha + 1.0) / n);
    let sigma_alpha = p_bar * (1.0 + alpha / n);
    let flags = {
        let supercritical = p_bar > n * (alpha + 1.0) / (n + alpha + 1.0);
        RegimeFlags {
            supercritical,
            subcritical: !supercritical,
            boundedness_window: p.iter().all(|&pi| pi > 1.0 && pi < sigma_alpha1),
            slow_diffusion: alpha + 1.0 < p1 && pn < sigma_alpha && sigma_alpha < n + alpha,
            rough_support: p
                .iter()
                .all(|&pi| alpha + 1.0 < pi && pi < sigma_alpha1)
                && sigma_alpha1 < n + alpha + 1.0,
            ultracontractive: p_bar * (1.0 + 1.0 / n) > alpha + 1.0,
        }
    };

    let rough_support = {
        let denom = n * (p_bar - alpha - 1.0) + p_bar * (alpha + 1.0);
        (flags.rough_support && denom > 0.0).then(|| {
            let chi: Vec<f64> = p
                .iter()
                .map(|&pi| p_bar * (pi - alpha - 1.0) / denom)
                .collect();
            let chi_min = chi.iter().copied().fold(f64::INFINITY, f64::min);
            let chi_max = chi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            RoughSupportExponents {
                d: (n * (p_bar - pn) + p_bar * (alpha + 1.0)) / denom,
                chi,
                chi_min,
                chi_max,
            }
        })
    };

    let conserved_decay_exponent = n / (n * (p_bar - alpha - 1.0) + alpha * p_bar);
    let conserved_support_exponent = p
        .iter()
        .map(|&pi| (1.0 - conserved_decay_exponent * (pi - 1.0 - alpha)) / pi)
        .collect();

    DerivedExponents {
        dim: a.dim(),
        alpha,
        p,
        p_bar,
        p_bar_star,
        big_p,
        lambda_1,
        mass_decay_exponent: n / lambda_1,
        mass_gain_exponent: p_bar / lambda_1,
        support_exponent,
        support_mass_exponent,
        m_threshold: (n / p_bar) * (alpha + 1.0 - p_bar),
        lambda_small: big_p - (n / p_bar) * (sigma_alpha1 - big_p),
        flags,
        rough_support,
        conserved_decay_exponent,
        conserved_support_exponent,
    }
}

/// Checks `Σ_i support_exponent_i = N/λ₁` and
/// `Σ_i support_mass_exponent_i = (λ₁ − p̄)/λ₁` to [`SUM_IDENTITY_RTOL`].
pub fn check_sum_identities(d: &DerivedExponents) -> bool {
    sum_identity_residuals(d)
        .map(|(a, b)| a <= SUM_IDENTITY_RTOL && b <= SUM_IDENTITY_RTOL)
        .unwrap_or(false)
}

/// Relative residuals of the two sum identities, `None` when `λ₁ ≤ 0`.
pub fn sum_identity_residuals(d: &DerivedExponents) -> Option<(f64, f64)> {
    if !(d.lambda_1 > 0.0) {
        return None;
    }
    let n = d.dim as f64;
    let time_target = n / d.lambda_1;
    let mass_target = (d.lambda_1 - d.p_bar) / d.lambda_1;
    let time_sum: f64 = d.support_exponent.iter().sum();
    let mass_sum: f64 = d.support_mass_exponent.iter().sum();
    Some((
        rel_diff(time_sum, time_target),
        rel_diff(mass_sum, mass_target),
    ))
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    if a == b {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
