//! Scalar kernels shared by the solver, the energy checker and the
//! property suites.

use crate::error::KernelError;

/// `|a|^{γ−1} a`, zero at `a = 0` for every `γ > 0`.
pub fn signed_power(a: f64, gamma: f64) -> Result<f64, KernelError> {
    if !(gamma > 0.0) {
        return Err(KernelError::NonPositiveExponent(gamma));
    }
    Ok(spow(a, gamma))
}

/// Unchecked [`signed_power`] for callers that validated `gamma` already.
#[inline]
pub(crate) fn spow(a: f64, gamma: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a.abs().powf(gamma).copysign(a)
    }
}

/// Regularised prototype flux `(s² + ε²)^{(p−2)/2} s`.
#[inline]
pub fn flux(s: f64, p: f64, eps: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    if eps == 0.0 {
        spow(s, p - 1.0)
    } else {
        (s * s + eps * eps).powf(0.5 * (p - 2.0)) * s
    }
}

/// `𝔟_α[v, w] = α/(α+1) (|v|^{α+1} − |w|^{α+1}) − w (|v|^{α−1}v − |w|^{α−1}w)`.
pub fn b_alpha(v: f64, w: f64, alpha: f64) -> f64 {
    alpha / (alpha + 1.0) * (v.abs().powf(alpha + 1.0) - w.abs().powf(alpha + 1.0))
        - w * (spow(v, alpha) - spow(w, alpha))
}

/// Inverse of `v = |u|^{α−1}u`.
#[inline]
pub fn u_from_v(v: f64, alpha: f64) -> f64 {
    spow(v, 1.0 / alpha)
}

/// `x ↦ |x|^{γ−1}x` with fast paths for the exponents the solver hits most:
/// integers and half-integers avoid `powf`.
#[derive(Debug, Clone, Copy)]
pub struct SignedPow {
    gamma: f64,
    kind: PowKind,
}

#[derive(Debug, Clone, Copy)]
enum PowKind {
    Identity,
    Int(i32),
    HalfInt(i32),
    General,
}

impl SignedPow {
    pub fn new(gamma: f64) -> Self {
        let kind = if gamma == 1.0 {
            PowKind::Identity
        } else if gamma.fract() == 0.0 && gamma.abs() < 32.0 {
            PowKind::Int(gamma as i32)
        } else if (2.0 * gamma).fract() == 0.0 && gamma > 0.0 && gamma < 32.0 {
            PowKind::HalfInt(gamma.floor() as i32)
        } else {
            PowKind::General
        };
        Self { gamma, kind }
    }

    /// `|x|^γ` without the sign.
    #[inline(always)]
    pub fn abs_pow(&self, x: f64) -> f64 {
        let a = x.abs();
        match self.kind {
            PowKind::Identity => a,
            PowKind::Int(k) => a.powi(k),
            PowKind::HalfInt(k) => a.powi(k) * a.sqrt(),
            PowKind::General => {
                if a == 0.0 {
                    0.0
                } else {
                    a.powf(self.gamma)
                }
            }
        }
    }

    #[inline(always)]
    pub fn apply(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            self.abs_pow(x).copysign(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Second algebraic form, `1/(α+1)(|w|^{α+1} − |v|^{α+1}) − v^α (w − v)`.
    fn b_alpha_dual(v: f64, w: f64, alpha: f64) -> f64 {
        (w.abs().powf(alpha + 1.0) - v.abs().powf(alpha + 1.0)) / (alpha + 1.0)
            - spow(v, alpha) * (w - v)
    }

    #[test]
    fn signed_power_examples() {
        assert_eq!(signed_power(-2.0, 3.0).unwrap(), -8.0);
        assert_eq!(signed_power(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(signed_power(4.0, 0.5).unwrap(), 2.0);
        assert!(signed_power(1.0, 0.0).is_err());
        assert!(signed_power(1.0, -1.0).is_err());
    }

    #[test]
    fn flux_examples() {
        assert_eq!(flux(3.0, 2.0, 0.0), 3.0);
        assert_eq!(flux(-2.0, 3.0, 0.0), -4.0);
        assert_eq!(flux(0.0, 1.7, 1e-6), 0.0);
        assert_relative_eq!(flux(0.3, 2.4, 0.0), spow(0.3, 1.4), max_relative = 1e-15);
    }

    #[test]
    fn b_alpha_examples() {
        assert_eq!(b_alpha(1.3, 1.3, 0.3), 0.0);
        assert_eq!(b_alpha(1.3, 1.3, 0.8), 0.0);
        assert_relative_eq!(b_alpha(1.0, 0.0, 0.5), 1.0 / 3.0, max_relative = 1e-15);
        // 40-digit reference from tools/exponent_oracle.py.
        assert_relative_eq!(b_alpha(2.0, -1.0, 0.5), 3.023_689_270_621_825, max_relative = 1e-14);
        assert_relative_eq!(
            b_alpha(2.0, -1.0, 0.5),
            b_alpha_dual(2.0, -1.0, 0.5),
            max_relative = 1e-14
        );
    }

    #[test]
    fn u_from_v_examples() {
        assert_eq!(u_from_v(-8.0, 0.5), -64.0);
        assert_eq!(u_from_v(0.0, 0.3), 0.0);
        assert_eq!(u_from_v(1.0, 0.37), 1.0);
    }

    #[test]
    fn fast_signed_pow_matches_powf() {
        for gamma in [1.0, 2.0, 3.0, 0.5, 1.5, 2.5, 1.25, 0.8, 1.0 / 0.7] {
            let fast = SignedPow::new(gamma);
            for x in [-3.7, -1.0, -0.2, 0.0, 1e-9, 0.5, 2.0, 11.0] {
                assert_relative_eq!(fast.apply(x), spow(x, gamma), max_relative = 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn b_alpha_forms_agree_and_are_nonnegative(
            v in -10.0f64..10.0, w in -10.0f64..10.0, alpha in 0.05f64..0.95
        ) {
            let b = b_alpha(v, w, alpha);
            prop_assert!(b >= -1e-12 * (1.0 + v.abs().max(w.abs()).powf(alpha + 1.0)));
            let dual = b_alpha_dual(v, w, alpha);
            prop_assert!((b - dual).abs() <= 1e-12 * (1.0 + v.abs().max(w.abs()).powf(alpha + 1.0)));
        }

        #[test]
        fn signed_power_is_odd_and_monotone(a in -50.0f64..50.0, b in -50.0f64..50.0, g in 0.1f64..4.0) {
            prop_assert_eq!(spow(-a, g), -spow(a, g));
            if a < b {
                prop_assert!(spow(a, g) <= spow(b, g));
            }
        }

        #[test]
        fn u_from_v_round_trip(u in -1e3f64..1e3, alpha in 0.05f64..1.0) {
            let back = u_from_v(spow(u, alpha), alpha);
            prop_assert!((back - u).abs() <= 1e-12 * u.abs().max(1e-300));
        }
    }
}
