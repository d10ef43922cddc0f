//! One function per subcommand. Each returns a serialisable report; the
//! binary decides where it goes and which exit code to use.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use dnad_core::analysis::{
    b_alpha_sandwich, mollifier_suite_with_tol, recursion_suite, signed_power_inequality, troisi_suite,
    MollifierSuiteReport, RecursionSuiteReport, SandwichReport, SignedPowerReport, TroisiSuiteReport,
    MOLLIFIER_RESIDUAL_TOL,
};
use dnad_core::diagnostics::{
    BoundednessReport,
    check_rectangle_optimality, check_support_law, check_ultracontractivity, default_window, mass_drift,
    max_increase, read_series_csv, report_boundedness_bound, slope_sensitivity, support_window, CsvSeriesWriter, SeriesContext,
};
use dnad_core::energy::{
    evaluate_energy_many, fitted_constant, general_formula_check, lhs_monotone_in_level, EnergyProbe,
    EnergyReport, GeneralFormulaReport, LevelSign, TestFunction,
};
use dnad_core::oracle::{barenblatt_oracle, heat_oracle, BarenblattSetup, HeatSetup, OracleReport};
use dnad_core::grid::Cylinder;
use dnad_core::params::check_sum_identities;
use dnad_core::solver::{run_stepper, RunOutput, Snapshot, Stepper, DEFAULT_RELATIVE_THRESHOLD};
use dnad_core::{derive, Anisotropy, DerivedExponents, SolverError, TimeSeriesRecord};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::io::{write_json, write_snapshots, SCHEMA_VERSION};

/// A command that ran but whose verdict is negative.
#[derive(Debug)]
pub struct Failed {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failed {}

/// Exit code for a check or suite whose verdict is negative.
pub const EXIT_CHECK_FAILED: i32 = 5;

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failed>() {
            return f.code;
        }
        if let Some(s) = cause.downcast_ref::<SolverError>() {
            return s.exit_code();
        }
    }
    1
}

// derive

#[derive(Debug, Clone, Serialize)]
pub struct DeriveReport {
    pub schema_version: u32,
    pub p_user: Vec<f64>,
    pub lambda_struct: f64,
    /// Sorted-axis exponents mapped back to user order.
    pub support_exponent_user: Vec<f64>,
    pub local_bound_exponent: Option<f64>,
    pub sum_identities_hold: bool,
    pub derived: DerivedExponents,
}

pub fn derive_report(anis: &Anisotropy) -> DeriveReport {
    let d = derive(anis);
    DeriveReport {
        schema_version: SCHEMA_VERSION,
        p_user: anis.p_user(),
        lambda_struct: anis.lambda_struct(),
        support_exponent_user: anis.to_user_order(&d.support_exponent),
        local_bound_exponent: d.local_bound_exponent(),
        sum_identities_hold: d.lambda_1 > 0.0 && check_sum_identities(&d),
        derived: d,
    }
}

pub fn derive_table(r: &DeriveReport) -> String {
    let d = &r.derived;
    let opt = |x: Option<f64>| x.map_or("absent".to_string(), |v| format!("{v:.6}"));
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
    let f = &d.flags;
    let rows = [
        ("N", d.dim.to_string()),
        ("alpha", format!("{}", d.alpha)),
        ("p (sorted)", list(&d.p)),
        ("p_bar", format!("{:.6}", d.p_bar)),
        ("p_bar_star", opt(d.p_bar_star)),
        ("P", format!("{:.6}", d.big_p)),
        ("lambda_1", format!("{:.6}", d.lambda_1)),
        ("N/lambda_1", format!("{:.6}", d.mass_decay_exponent)),
        ("p_bar/lambda_1", format!("{:.6}", d.mass_gain_exponent)),
        ("support exponents", list(&d.support_exponent)),
        ("support mass exponents", list(&d.support_mass_exponent)),
        ("m threshold", format!("{:.6}", d.m_threshold)),
        ("lambda(alpha,N,p)", format!("{:.6}", d.lambda_small)),
        ("local bound exponent", opt(r.local_bound_exponent)),
        ("conserved decay rate", format!("{:.6}", d.conserved_decay_exponent)),
        ("supercritical", f.supercritical.to_string()),
        ("boundedness window", f.boundedness_window.to_string()),
        ("slow diffusion", f.slow_diffusion.to_string()),
        ("rough support", f.rough_support.to_string()),
        ("ultracontractive", f.ultracontractive.to_string()),
        ("sum identities", r.sum_identities_hold.to_string()),
    ];
    let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
}

// run

#[derive(Debug, Clone, Serialize)]
pub struct NormsAt {
    pub t: f64,
    pub mass_v: f64,
    pub l1_u: f64,
    pub lalpha1_u: f64,
    pub linf_u: f64,
    pub supp: Vec<f64>,
}

impl From<&TimeSeriesRecord> for NormsAt {
    fn from(r: &TimeSeriesRecord) -> Self {
        Self {
            t: r.t,
            mass_v: r.mass_v,
            l1_u: r.l1_u,
            lalpha1_u: r.lalpha1_u,
            linf_u: r.linf_u,
            supp: r.supp.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AbortInfo {
    pub reason: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub accepted_steps: u64,
    pub t_final: f64,
    pub wall_seconds: f64,
    pub threshold: f64,
    pub r0: f64,
    pub records: usize,
    pub snapshots: usize,
    pub initial: NormsAt,
    #[serde(rename = "final")]
    pub last: NormsAt,
    pub mass_drift: f64,
    pub abort: Option<AbortInfo>,
}

/// Runs a configuration, streaming the CSV and writing snapshots and the
/// summary where the config asks for them. Outputs are written before an
/// abort is reported.
pub fn run_config(cfg: &RunConfig) -> Result<(RunOutput, RunSummary)> {
    let (solver_cfg, datum) = cfg.build()?;
    let dim = cfg.dim;
    let stepper = Stepper::new(solver_cfg, &datum)?;
    let mut csv = match &cfg.output.csv_path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|q| !q.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Some(CsvSeriesWriter::new(BufWriter::new(f), dim)?)
        }
        None => None,
    };
    let mut csv_error = None;
    let start = Instant::now();
    let out = run_stepper(stepper, |r| {
        if let Some(w) = csv.as_mut() {
            if let Err(e) = w.write(r) {
                csv_error.get_or_insert(e);
            }
        }
    });
    let wall_seconds = start.elapsed().as_secs_f64();
    if let Some(w) = csv.as_mut() {
        w.flush()?;
    }
    if let Some(e) = csv_error {
        return Err(e.into());
    }
    if let Some(dir) = &cfg.output.snapshot_dir {
        write_snapshots(dir, &out.snapshots)?;
    }
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        accepted_steps: out.steps,
        t_final: out.t_final,
        wall_seconds,
        threshold: out.threshold,
        r0: datum.r0(),
        records: out.records.len(),
        snapshots: out.snapshots.len(),
        initial: (&out.records[0]).into(),
        last: out.records.last().expect("at least one record").into(),
        mass_drift: mass_drift(&out.records),
        abort: out.abort.as_ref().map(|e| AbortInfo {
            reason: e.to_string(),
            exit_code: e.exit_code(),
        }),
    };
    if let Some(p) = &cfg.output.summary_path {
        write_json(p, &summary)?;
    }
    Ok((out, summary))
}

// fit

/// A check's verdict, or the reason it declined to run.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Outcome<T> {
    Done(T),
    Refused { refused: String },
}

impl<T> Outcome<T> {
    fn from_result<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome::Done(v),
            Err(e) => Outcome::Refused { refused: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub window: [f64; 2],
    /// Window of the support law; shared with the comparison series.
    pub support_window: [f64; 2],
    pub context: SeriesContext,
    pub mass_drift: f64,
    /// Largest relative increase of `‖u‖₁` between consecutive records.
    pub l1_max_increase: f64,
    pub lalpha1_max_increase: f64,
    pub ultracontractivity: Outcome<dnad_core::diagnostics::UltracontractivityVerdict>,
    pub support_law: Outcome<dnad_core::diagnostics::SupportVerdict>,
    pub rectangle: dnad_core::diagnostics::RectangleVerdict,
    /// Per-axis relative slope change against the comparison series.
    pub threshold_sensitivity: Option<Vec<f64>>,
}

/// Context for a series produced by `cfg`.
pub fn series_context(cfg: &RunConfig, series: &[TimeSeriesRecord]) -> Result<SeriesContext> {
    let grid = cfg.grid()?;
    let first = series.first().context("empty time series")?;
    let last = series.last().context("empty time series")?;
    Ok(SeriesContext {
        r0: cfg.datum().r0(),
        initial_l1: first.l1_u,
        threshold: cfg.solver.support_threshold.unwrap_or(DEFAULT_RELATIVE_THRESHOLD * first.linf_u),
        half_length: grid.half_length().to_vec(),
        spacing: grid.spacing().to_vec(),
        p: cfg.p.clone(),
        aborted: last.t < cfg.solver.t_end * (1.0 - 1e-9),
    })
}

pub fn fit_report(
    cfg: &RunConfig,
    series: &[TimeSeriesRecord],
    window: Option<(f64, f64)>,
    compare: Option<&[TimeSeriesRecord]>,
) -> Result<FitReport> {
    let d = derive(&cfg.anisotropy()?);
    let ctx = series_context(cfg, series)?;
    let w = window.unwrap_or_else(|| default_window(series));
    let sw = window.unwrap_or_else(|| {
        let own = support_window(series, ctx.r0);
        let other = compare.map_or(own.0, |o| support_window(o, ctx.r0).0);
        (own.0.max(other), own.1)
    });
    let support = check_support_law(series, &d, &ctx, sw);
    let threshold_sensitivity = match (compare, &support) {
        (Some(other), Ok(base)) => {
            let octx = series_context(cfg, other)?;
            let alt = check_support_law(other, &d, &octx, sw)?;
            Some(slope_sensitivity(base, &alt))
        }
        _ => None,
    };
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        window: [w.0, w.1],
        support_window: [sw.0, sw.1],
        mass_drift: mass_drift(series),
        l1_max_increase: max_increase(series, |r| r.l1_u),
        lalpha1_max_increase: max_increase(series, |r| r.lalpha1_u),
        ultracontractivity: Outcome::from_result(check_ultracontractivity(series, &d, ctx.initial_l1, w)),
        support_law: Outcome::from_result(support),
        rectangle: check_rectangle_optimality(series, &ctx, w),
        threshold_sensitivity,
        context: ctx,
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<TimeSeriesRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_series_csv(std::io::BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

// check

pub const CHECK_ALPHAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const MOLLIFIER_SIGNALS: usize = 100;
pub const TROISI_RESOLUTIONS: [usize; 3] = [32, 48, 64];

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub seed: u64,
    pub trials: usize,
    pub warnings: Vec<String>,
    /// The mollifier tolerance was replaced by zero to prove the suite can fail.
    pub injected_failure: bool,
    pub b_alpha_sandwich: Vec<SandwichReport>,
    pub signed_power: SignedPowerReport,
    pub mollifier: MollifierSuiteReport,
    pub recursions: RecursionSuiteReport,
    pub troisi: TroisiSuiteReport,
    pub pass: bool,
}

pub fn check_report(seed: u64, trials: usize, inject_failure: bool) -> CheckReport {
    let mut warnings = Vec::new();
    if trials == 0 {
        warnings.push("zero trials requested: randomized suites pass vacuously".to_string());
    }
    let sandwich: Vec<SandwichReport> = CHECK_ALPHAS
        .iter()
        .enumerate()
        .map(|(k, &a)| b_alpha_sandwich(a, trials, seed.wrapping_add(k as u64)))
        .collect();
    let signed_power = signed_power_inequality(trials, seed);
    let signals = if trials == 0 { 0 } else { MOLLIFIER_SIGNALS };
    let tol = if inject_failure { 0.0 } else { MOLLIFIER_RESIDUAL_TOL };
    let mollifier = mollifier_suite_with_tol(signals, seed, tol);
    if inject_failure && signals == 0 {
        warnings.push("failure injection has no effect without mollifier signals".to_string());
    }
    let recursions = recursion_suite();
    let troisi = troisi_suite(&TROISI_RESOLUTIONS);
    let pass = sandwich.iter().all(|s| s.pass) && signed_power.pass && mollifier.pass && recursions.pass && troisi.pass;
    CheckReport {
        schema_version: SCHEMA_VERSION,
        seed,
        trials,
        warnings,
        injected_failure: inject_failure,
        b_alpha_sandwich: sandwich,
        signed_power,
        mollifier,
        recursions,
        troisi,
        pass,
    }
}

// energy

/// One `[[probe]]` or `[[general]]` table of a probe file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub center: Vec<f64>,
    /// Explicit half-widths; alternatively `r` selects the intrinsic box.
    #[serde(default)]
    pub extents: Option<Vec<f64>>,
    #[serde(default)]
    pub r: Option<f64>,
    pub window: [f64; 2],
    /// Absolute levels.
    #[serde(default)]
    pub levels: Vec<f64>,
    /// Levels as fractions of `max u` over the snapshots in the window.
    #[serde(default)]
    pub level_fractions: Vec<f64>,
    #[serde(default)]
    pub sign: LevelSign,
    #[serde(default)]
    pub plateau: Option<f64>,
    #[serde(default)]
    pub ramp: Option<f64>,
    /// Only for `[[general]]` tables.
    #[serde(default)]
    pub test_function: Option<TestFunction>,
}

/// One `[[bound]]` table: the backward cylinder `(x_o, t_o) + K_r × (−r, 0]`
/// and the shrink factor of the local boundedness estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub center: Vec<f64>,
    pub t_o: f64,
    pub r: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_sigma() -> f64 {
    0.5
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeFile {
    #[serde(default)]
    pub probe: Vec<ProbeSpec>,
    #[serde(default)]
    pub general: Vec<ProbeSpec>,
    #[serde(default)]
    pub bound: Vec<BoundSpec>,
}

impl ProbeFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn base_probe(spec: &ProbeSpec, p: &[f64]) -> Result<EnergyProbe> {
    let mut probe = match (&spec.extents, spec.r) {
        (Some(e), None) => EnergyProbe {
            center: spec.center.clone(),
            extents: e.clone(),
            window: spec.window,
            level: 0.0,
            sign: spec.sign,
            plateau: 0.5,
            ramp: 0.5,
        },
        (None, Some(r)) => {
            if spec.center.len() != p.len() || !(r > 0.0) {
                bail!("probe needs {} centre coordinates and r > 0", p.len());
            }
            EnergyProbe::intrinsic(&spec.center, r, p, spec.window, 0.0)
        }
        _ => bail!("probe needs exactly one of `extents` or `r`"),
    };
    probe.sign = spec.sign;
    if let Some(pl) = spec.plateau {
        probe.plateau = pl;
    }
    if let Some(rm) = spec.ramp {
        probe.ramp = rm;
    }
    Ok(probe)
}

/// Largest value over the snapshots inside `window`.
pub fn max_in_window(snaps: &[Snapshot], window: [f64; 2]) -> f64 {
    snaps
        .iter()
        .filter(|s| s.t >= window[0] && s.t <= window[1])
        .flat_map(|s| s.u.values().iter().copied())
        .fold(0.0, f64::max)
}

/// Expands every `[[probe]]` table into one probe per level.
pub fn expand_probes(file: &ProbeFile, snaps: &[Snapshot], p: &[f64]) -> Result<Vec<EnergyProbe>> {
    let mut out = Vec::new();
    for spec in &file.probe {
        if spec.test_function.is_some() {
            bail!("test_function belongs in a [[general]] table");
        }
        let base = base_probe(spec, p)?;
        let top = max_in_window(snaps, spec.window);
        let levels = spec.levels.iter().copied().chain(spec.level_fractions.iter().map(|f| f * top));
        out.extend(levels.map(|k| base.with_level(k)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyOutput {
    pub schema_version: u32,
    pub reports: Vec<EnergyReport>,
    /// Largest finite ratio over all probes.
    pub fitted_constant: Option<f64>,
    /// Per `[[probe]]` table: left-side terms nonincreasing along the levels.
    pub monotone_in_level: Vec<bool>,
    pub general_formula: Vec<GeneralFormulaReport>,
    pub boundedness: Vec<BoundednessReport>,
}

pub fn energy_report(anis: &Anisotropy, snaps: &[Snapshot], file: &ProbeFile) -> Result<EnergyOutput> {
    let p = anis.p_user();
    let mut reports = Vec::new();
    let mut monotone = Vec::new();
    for spec in &file.probe {
        let single = ProbeFile {
            probe: vec![spec.clone()],
            ..ProbeFile::default()
        };
        let probes = expand_probes(&single, snaps, &p)?;
        let batch = evaluate_energy_many(snaps, &probes, anis)
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        monotone.push(lhs_monotone_in_level(&batch));
        reports.extend(batch);
    }
    let mut general = Vec::new();
    for spec in &file.general {
        let f = spec.test_function.context("[[general]] table needs a test_function")?;
        let probe = base_probe(spec, &p)?;
        general.push(general_formula_check(snaps, &f, &probe, anis)?);
    }
    let d = derive(anis);
    let mut boundedness = Vec::new();
    for b in &file.bound {
        if b.center.len() != p.len() || !(b.r > 0.0) {
            bail!("[[bound]] needs {} centre coordinates and r > 0", p.len());
        }
        let cyl = Cylinder::intrinsic(&b.center, b.t_o, b.r, &p);
        boundedness.push(report_boundedness_bound(snaps, &d, &cyl, b.sigma, &p)?);
    }
    Ok(EnergyOutput {
        schema_version: SCHEMA_VERSION,
        fitted_constant: fitted_constant(&reports),
        monotone_in_level: monotone,
        reports,
        general_formula: general,
        boundedness,
    })
}

// oracle

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Heat,
    Barenblatt,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleOutput {
    pub schema_version: u32,
    #[serde(flatten)]
    pub report: OracleReport,
}

pub fn oracle_report(which: OracleKind, resolutions: &[usize]) -> Result<OracleOutput> {
    let report = match which {
        OracleKind::Heat => heat_oracle(&HeatSetup::default(), resolutions)?,
        OracleKind::Barenblatt => barenblatt_oracle(&BarenblattSetup::default(), resolutions)?,
    };
    Ok(OracleOutput {
        schema_version: SCHEMA_VERSION,
        report,
    })
}

/// Value with `schema_version` for ad hoc documents.
pub fn versioned(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    v
}
