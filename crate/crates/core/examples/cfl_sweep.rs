//! CFL stability sweep. Runs a few regimes at increasing `cfl` and prints a
//! markdown table: abort status, steps, the most negative value of `u`, the
//! largest step increase of `‖u‖∞`, mass drift, and the final-state distance
//! to a `cfl = 0.05` run.
//!
//! `cargo run --release -p dnad-core --example cfl_sweep`

use dnad_core::diagnostics::{mass_drift, max_increase};
use dnad_core::solver::{default_eps_grad, DatumKind, Stepper};
use dnad_core::{Anisotropy, GridSpec, InitialDatum, SolverConfig};

struct Case {
    name: &'static str,
    alpha: f64,
    p: &'static [f64],
    cells: usize,
    amplitude: f64,
    t_end: f64,
    /// Support threshold relative to the amplitude; `None` keeps the default.
    threshold: Option<f64>,
}

struct Outcome {
    status: String,
    steps: u64,
    min_u: f64,
    linf_rise: f64,
    mass: f64,
    u: Vec<f64>,
}

fn run(c: &Case, cfl: f64) -> Outcome {
    let dim = c.p.len();
    let anis = Anisotropy::new(c.alpha, c.p).unwrap();
    let mut cfg = SolverConfig::new(anis, GridSpec::cube(dim, 2.0, c.cells).unwrap(), c.t_end);
    cfg.cfl = cfl;
    cfg.eps_grad = default_eps_grad(c.p, c.amplitude);
    cfg.support_threshold = c.threshold.map(|r| r * c.amplitude);
    let datum = InitialDatum::centered(DatumKind::CosineBump, c.amplitude, &vec![0.3; dim]);
    let mut s = Stepper::new(cfg, &datum).unwrap();
    let mut records = vec![s.record(0.0)];
    let mut min_u = 0.0f64;
    let mut status = "ok".to_string();
    while !s.is_finished() {
        match s.step() {
            Ok(dt) => records.push(s.record(dt)),
            Err(e) => {
                status = format!("exit {}", e.exit_code());
                break;
            }
        }
        if s.steps().is_multiple_of(10) {
            min_u = s.u().values().iter().copied().fold(min_u, f64::min);
        }
    }
    let linf0 = s.initial_linf();
    Outcome {
        status,
        steps: s.steps(),
        min_u: min_u / linf0,
        linf_rise: max_increase(&records, |r| r.linf_u),
        mass: mass_drift(&records),
        u: s.u().into_values(),
    }
}

fn main() {
    let cases = [
        Case { name: "2D a=0.5 p=(2.2,2.4)", alpha: 0.5, p: &[2.2, 2.4], cells: 96, amplitude: 100.0, t_end: 0.05, threshold: None },
        Case { name: "2D heat", alpha: 1.0, p: &[2.0, 2.0], cells: 96, amplitude: 1.0, t_end: 0.01, threshold: None },
        Case { name: "2D a=0.3 p=(3.5,4.5)", alpha: 0.3, p: &[3.5, 4.5], cells: 96, amplitude: 5.0, t_end: 0.05, threshold: None },
        Case { name: "2D a=1 p=(1.6,2.4)", alpha: 1.0, p: &[1.6, 2.4], cells: 64, amplitude: 1.0, t_end: 2e-3, threshold: Some(1e-6) },
        Case { name: "3D reference 32^3", alpha: 0.5, p: &[2.2, 2.4, 2.6], cells: 32, amplitude: 100.0, t_end: 0.05, threshold: None },
    ];
    println!("| case | cfl | status | steps | min u/‖u₀‖∞ | max ‖u‖∞ rise | mass drift | ‖u − u_ref‖∞/‖u_ref‖∞ |");
    println!("|---|---|---|---|---|---|---|---|");
    for c in &cases {
        let reference = run(c, 0.05);
        let top = reference.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for cfl in [0.2, 0.4, 0.6, 0.8, 1.0] {
            let o = run(c, cfl);
            let dist = o.u.iter().zip(&reference.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / top;
            println!(
                "| {} | {cfl} | {} | {} | {:.1e} | {:.1e} | {:.1e} | {:.2e} |",
                c.name, o.status, o.steps, o.min_u, o.linf_rise, o.mass, dist
            );
        }
    }
}
