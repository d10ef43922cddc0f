//! Shared fixtures for the criterion benches.

use dnad_core::solver::{DatumKind, Stepper};
use dnad_core::{Anisotropy, GridSpec, InitialDatum, SolverConfig};

/// Evenly spread arguments in `[−1, 1]`, no exact zeros.
pub fn samples(n: usize) -> Vec<f64> {
    (0..n).map(|k| -1.0 + (2 * k + 1) as f64 / n as f64).collect()
}

/// Stepper on a centred cosine bump in the slow-diffusion regime.
pub fn bump_stepper(alpha: f64, p: &[f64], cells: usize) -> Stepper {
    let dim = p.len();
    let anis = Anisotropy::new(alpha, p).expect("valid exponents");
    let grid = GridSpec::cube(dim, 2.0, cells).expect("grid");
    let cfg = SolverConfig::new(anis, grid, 1e6);
    let datum = InitialDatum::centered(DatumKind::CosineBump, 100.0, &vec![0.2; dim]);
    Stepper::new(cfg, &datum).expect("stepper")
}

/// Steps `s`, restarting from `fresh` once the support reaches the collar.
pub fn step_or_restart(s: &mut Stepper, fresh: &Stepper) -> f64 {
    match s.step() {
        Ok(dt) => dt,
        Err(_) => {
            *s = fresh.clone();
            s.step().expect("fresh stepper steps")
        }
    }
}
