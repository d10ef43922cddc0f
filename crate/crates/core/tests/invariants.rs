use dnad_core::diagnostics::{mass_drift, max_increase};
use dnad_core::solver::{default_eps_grad, run, DatumKind, Stepper};
use dnad_core::{Anisotropy, GridSpec, InitialDatum, SolverConfig, SolverError};
use proptest::prelude::*;

fn small_run(alpha: f64, p: &[f64], amplitude: f64, t_end: f64) -> dnad_core::solver::RunOutput {
    let dim = p.len();
    let anis = Anisotropy::new(alpha, p).unwrap();
    let grid = GridSpec::cube(dim, 2.0, if dim == 1 { 128 } else { 40 }).unwrap();
    let cfg = SolverConfig::new(anis, grid, t_end);
    let datum = InitialDatum::centered(DatumKind::CosineBump, amplitude, &vec![0.4; dim]);
    run(cfg, &datum).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conservation_and_monotone_norms(
        alpha in 0.3f64..=1.0,
        p in prop::collection::vec(2.05f64..3.0, 1..=2),
        amplitude in 0.5f64..5.0,
    ) {
        let out = small_run(alpha, &p, amplitude, 0.05);
        prop_assert!(out.abort.is_none(), "{:?}", out.abort);
        prop_assert!(mass_drift(&out.records) < 1e-12);
        prop_assert!(max_increase(&out.records, |r| r.l1_u) <= 1e-10);
        prop_assert!(max_increase(&out.records, |r| r.lalpha1_u) <= 1e-10);
        prop_assert!(max_increase(&out.records, |r| r.linf_u) <= 1e-10);
    }

    #[test]
    fn support_never_shrinks(alpha in 0.3f64..=1.0, p in 2.1f64..3.0) {
        let out = small_run(alpha, &[p, p + 0.2], 2.0, 0.05);
        for w in out.records.windows(2) {
            for (a, b) in w[0].supp.iter().zip(&w[1].supp) {
                prop_assert!(b >= a);
            }
        }
    }
}

#[test]
fn scaling_the_datum_rescales_time() {
    // u(x,t) solves the equation iff c·u(x, c^{p−1−α} t) does, isotropic p
    let (alpha, p, c) = (0.6, 2.5, 2.0);
    let a = small_run(alpha, &[p, p], 1.0, 0.08);
    let b = small_run(alpha, &[p, p], c, 0.08 / c.powf(p - 1.0 - alpha));
    let (la, lb) = (a.records.last().unwrap(), b.records.last().unwrap());
    assert!((lb.linf_u / (c * la.linf_u) - 1.0).abs() < 0.02, "{} vs {}", lb.linf_u, c * la.linf_u);
}

fn stepper(alpha: f64, p: &[f64], cells: usize, cfl: f64, t_end: f64) -> Stepper {
    let dim = p.len();
    let mut cfg = SolverConfig::new(Anisotropy::new(alpha, p).unwrap(), GridSpec::cube(dim, 2.0, cells).unwrap(), t_end);
    cfg.cfl = cfl;
    cfg.eps_grad = default_eps_grad(p, 3.0);
    let datum = InitialDatum::centered(DatumKind::CosineBump, 3.0, &vec![0.5; dim]);
    Stepper::new(cfg, &datum).unwrap()
}

fn final_u(mut s: Stepper) -> Vec<f64> {
    while !s.is_finished() {
        s.step().unwrap();
    }
    s.u().into_values()
}

fn linf_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn halving_the_time_step_is_first_order() {
    let (alpha, p) = (0.7, [2.3, 2.6]);
    let u: Vec<_> = [0.4, 0.2, 0.1].iter().map(|&c| final_u(stepper(alpha, &p, 48, c, 0.05))).collect();
    let (d1, d2) = (linf_diff(&u[0], &u[1]), linf_diff(&u[1], &u[2]));
    assert!(d1 / d2 >= 1.5, "{d1:e} / {d2:e}");
}

#[test]
fn nonnegative_data_stay_nonnegative() {
    for (alpha, p) in [(0.5, vec![2.2, 2.4, 2.6]), (1.0, vec![1.6, 2.0, 3.0]), (0.3, vec![3.5, 4.0, 4.5])] {
        let mut s = stepper(alpha, &p, 24, 1.0, 0.05);
        let top = s.initial_linf();
        while !s.is_finished() {
            match s.step() {
                Err(SolverError::DomainExhausted { .. }) => break,
                r => r.unwrap(),
            };
            let min = s.u().values().iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-12 * top, "alpha {alpha}, p {p:?}: min {min:e}");
        }
    }
}

#[test]
fn even_data_give_even_solutions() {
    let mut s = stepper(0.6, &[2.2, 2.5, 2.9], 30, 0.4, 0.05);
    while !s.is_finished() {
        s.step().unwrap();
    }
    let u = s.u();
    let spec = u.spec().clone();
    let top = u.values().iter().copied().fold(0.0, f64::max);
    for flat in 0..spec.len() {
        let idx = spec.multi_index(flat);
        for axis in 0..3 {
            let mut m = idx.clone();
            m[axis] = spec.cells()[axis] - 1 - idx[axis];
            let diff = (u.values()[flat] - u.values()[spec.flat_index(&m)]).abs();
            assert!(diff <= 1e-12 * top, "axis {axis} at {idx:?}: {diff:e}");
        }
    }
}
