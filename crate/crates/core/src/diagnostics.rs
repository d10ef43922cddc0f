//! Time-series records, power-law fits and the scaling-law checks.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{DiagnosticsError, IoError};
use crate::grid::{restrict_to_cylinder, Cylinder, GridSpec};
use crate::params::DerivedExponents;
use crate::solver::Snapshot;

/// One diagnostic row per recorded step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    /// `Σ v · Πhᵢ`.
    pub mass_v: f64,
    pub l1_u: f64,
    pub lalpha1_u: f64,
    pub linf_u: f64,
    /// Per-axis support half-width at the run's threshold.
    pub supp: Vec<f64>,
}

pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: [f64; 2],
    pub n_points: usize,
}

/// Ordinary least squares of `ln y` against `ln t` over points with
/// `t ∈ [window.0, window.1]`.
pub fn fit_power_law(points: &[(f64, f64)], window: (f64, f64)) -> Result<FitResult, DiagnosticsError> {
    let inside: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if inside.len() < MIN_FIT_POINTS {
        return Err(DiagnosticsError::TooFewPoints {
            need: MIN_FIT_POINTS,
            found: inside.len(),
        });
    }
    if let Some(&(t, y)) = inside.iter().find(|&&(t, y)| !(y > 0.0) || !(t > 0.0)) {
        return Err(DiagnosticsError::NonPositive { t, value: y });
    }
    let n = inside.len() as f64;
    let xs: Vec<f64> = inside.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = inside.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(DiagnosticsError::TooFewPoints {
            need: MIN_FIT_POINTS,
            found: 1,
        });
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept: my - slope * mx,
        r_squared,
        window: [inside[0].0, inside[inside.len() - 1].0],
        n_points: inside.len(),
    })
}

/// The last full decade `[t_end/10, t_end]` of a series.
pub fn default_window(series: &[TimeSeriesRecord]) -> (f64, f64) {
    let t_end = series.last().map_or(0.0, |r| r.t);
    (t_end / 10.0, t_end)
}

/// Window for the support law: the last decade, started later if needed so
/// every axis stays at or above `4 R₀` from the first record on.
pub fn support_window(series: &[TimeSeriesRecord], r0: f64) -> (f64, f64) {
    let (mut lo, hi) = default_window(series);
    if let Some(k) = series.iter().rposition(|r| r.supp.iter().any(|&s| s < 4.0 * r0)) {
        if let Some(next) = series.get(k + 1) {
            lo = lo.max(next.t);
        }
    }
    (lo, hi)
}

fn column(series: &[TimeSeriesRecord], f: impl Fn(&TimeSeriesRecord) -> f64) -> Vec<(f64, f64)> {
    series.iter().map(|r| (r.t, f(r))).collect()
}

fn in_window(series: &[TimeSeriesRecord], w: (f64, f64)) -> impl Iterator<Item = &TimeSeriesRecord> {
    series.iter().filter(move |r| r.t >= w.0 && r.t <= w.1)
}

/// Largest relative deviation of `mass_v` from its first value.
pub fn mass_drift(series: &[TimeSeriesRecord]) -> f64 {
    let m0 = series.first().map_or(0.0, |r| r.mass_v);
    series
        .iter()
        .map(|r| ((r.mass_v - m0) / m0).abs())
        .fold(0.0, f64::max)
}

/// Largest relative increase of a column between consecutive records.
pub fn max_increase(series: &[TimeSeriesRecord], f: impl Fn(&TimeSeriesRecord) -> f64) -> f64 {
    let first = series.first().map_or(1.0, &f);
    series
        .windows(2)
        .map(|w| (f(&w[1]) - f(&w[0])) / first)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    fn of(xs: impl Iterator<Item = f64>) -> Self {
        xs.fold(
            Interval {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |acc, x| Interval {
                min: acc.min.min(x),
                max: acc.max.max(x),
            },
        )
    }

    pub fn ratio(&self) -> f64 {
        self.max / self.min
    }
}

pub const ULTRACONTRACTIVE_TOL: f64 = 0.15;

#[derive(Debug, Clone, Serialize)]
pub struct UltracontractivityVerdict {
    /// `−N/λ₁`.
    pub target: f64,
    pub fit: FitResult,
    pub relative_deviation: f64,
    pub tolerance: f64,
    /// `‖u‖∞ t^{N/λ₁} / ‖u₀‖₁^{p̄/λ₁}` over the window; `max` is the empirical `c`.
    pub prefactor: Interval,
    pub prefactor_bounded: bool,
    /// Decay rate of the self-similar solutions that conserve `∫|u|^{α−1}u`,
    /// `−N/(N(p̄−1−α)+αp̄)`; equals `target` when `α = 1`.
    pub self_similar_rate: f64,
    pub pass: bool,
}

pub fn check_ultracontractivity(
    series: &[TimeSeriesRecord],
    d: &DerivedExponents,
    initial_l1: f64,
    window: (f64, f64),
) -> Result<UltracontractivityVerdict, DiagnosticsError> {
    if !d.flags.ultracontractive || !(d.lambda_1 > 0.0) {
        return Err(DiagnosticsError::Refused(format!(
            "L1-Linf smoothing needs p̄(1+1/N) > α+1 and λ₁ > 0 (p̄ = {}, α = {}, λ₁ = {})",
            d.p_bar, d.alpha, d.lambda_1
        )));
    }
    let fit = fit_power_law(&column(series, |r| r.linf_u), window)?;
    let target = -d.mass_decay_exponent;
    let relative_deviation = ((fit.slope - target) / target).abs();
    let prefactor = Interval::of(
        in_window(series, window)
            .map(|r| r.linf_u * r.t.powf(d.mass_decay_exponent) / initial_l1.powf(d.mass_gain_exponent)),
    );
    let prefactor_bounded = prefactor.min > 0.0 && prefactor.max.is_finite();
    Ok(UltracontractivityVerdict {
        target,
        relative_deviation,
        tolerance: ULTRACONTRACTIVE_TOL,
        prefactor_bounded,
        self_similar_rate: -d.conserved_decay_exponent,
        pass: relative_deviation <= ULTRACONTRACTIVE_TOL && prefactor_bounded,
        fit,
        prefactor,
    })
}

/// Facts about the run that produced a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesContext {
    /// `supp u₀ ⊂ [−R₀, R₀]ᴺ`.
    pub r0: f64,
    pub initial_l1: f64,
    pub threshold: f64,
    /// Grid axes in user order.
    pub half_length: Vec<f64>,
    pub spacing: Vec<f64>,
    /// Growth exponent of each grid axis.
    pub p: Vec<f64>,
    /// The run stopped before `t_end`.
    pub aborted: bool,
}

impl SeriesContext {
    pub fn domain_volume(&self) -> f64 {
        self.half_length.iter().map(|l| 2.0 * l).product()
    }
}

pub const SUPPORT_TOL: f64 = 0.20;

#[derive(Debug, Clone, Serialize)]
pub struct AxisSupportFit {
    pub axis: usize,
    pub p: f64,
    pub target: f64,
    pub fit: FitResult,
    pub relative_deviation: f64,
    /// Slope of the raw half-width `Rᵢ(t)` without the `2R₀` offset.
    pub raw_slope: f64,
    /// Spreading rate of the `∫|u|^{α−1}u`-conserving self-similar solutions.
    pub self_similar_rate: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportVerdict {
    pub axes: Vec<AxisSupportFit>,
    pub tolerance: f64,
    /// Targets strictly decrease in `pᵢ`.
    pub targets_ranked: bool,
    /// Fitted slopes strictly decrease in `pᵢ`.
    pub measured_ranked: bool,
    pub pass: bool,
}

fn support_rate(d: &DerivedExponents, p: f64) -> f64 {
    let n = d.dim as f64;
    (n * (d.p_bar - p) + d.p_bar) / (d.lambda_1 * p)
}

fn self_similar_support_rate(d: &DerivedExponents, p: f64) -> f64 {
    (1.0 - d.conserved_decay_exponent * (p - 1.0 - d.alpha)) / p
}

fn strictly_decreasing_in_p(p: &[f64], vals: &[f64]) -> bool {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    idx.windows(2).all(|w| p[w[0]] == p[w[1]] || vals[w[1]] < vals[w[0]])
}

pub fn check_support_law(
    series: &[TimeSeriesRecord],
    d: &DerivedExponents,
    ctx: &SeriesContext,
    window: (f64, f64),
) -> Result<SupportVerdict, DiagnosticsError> {
    if !d.flags.slow_diffusion {
        return Err(DiagnosticsError::Refused(
            "support law needs α+1 < p₁, p_N < p̄(1+α/N) < N+α".into(),
        ));
    }
    if ctx.aborted {
        return Err(DiagnosticsError::Refused(
            "the run stopped early; its tail is truncated".into(),
        ));
    }
    let dim = ctx.p.len();
    for r in in_window(series, window) {
        for i in 0..dim {
            if r.supp[i] < 4.0 * ctx.r0 {
                return Err(DiagnosticsError::Refused(format!(
                    "axis {}: support {} < 4 R₀ = {} at t = {}",
                    i + 1,
                    r.supp[i],
                    4.0 * ctx.r0,
                    r.t
                )));
            }
            if r.supp[i] + 2.0 * ctx.spacing[i] >= ctx.half_length[i] {
                return Err(DiagnosticsError::Refused(format!(
                    "axis {}: support reached the boundary collar at t = {}",
                    i + 1,
                    r.t
                )));
            }
        }
    }
    let mut axes = Vec::with_capacity(dim);
    for i in 0..dim {
        let fit = fit_power_law(&column(series, |r| r.supp[i] - 2.0 * ctx.r0), window)?;
        let raw = fit_power_law(&column(series, |r| r.supp[i]), window)?;
        let target = support_rate(d, ctx.p[i]);
        let relative_deviation = ((fit.slope - target) / target).abs();
        axes.push(AxisSupportFit {
            axis: i + 1,
            p: ctx.p[i],
            target,
            relative_deviation,
            raw_slope: raw.slope,
            self_similar_rate: self_similar_support_rate(d, ctx.p[i]),
            pass: relative_deviation <= SUPPORT_TOL,
            fit,
        });
    }
    let targets: Vec<f64> = axes.iter().map(|a| a.target).collect();
    let slopes: Vec<f64> = axes.iter().map(|a| a.fit.slope).collect();
    let targets_ranked = strictly_decreasing_in_p(&ctx.p, &targets);
    let measured_ranked = strictly_decreasing_in_p(&ctx.p, &slopes);
    Ok(SupportVerdict {
        pass: axes.iter().all(|a| a.pass) && targets_ranked && measured_ranked,
        axes,
        tolerance: SUPPORT_TOL,
        targets_ranked,
        measured_ranked,
    })
}

/// Per-axis `|s_b − s_a| / |s_a|` between two support verdicts.
pub fn slope_sensitivity(a: &SupportVerdict, b: &SupportVerdict) -> Vec<f64> {
    a.axes
        .iter()
        .zip(&b.axes)
        .map(|(x, y)| ((y.fit.slope - x.fit.slope) / x.fit.slope).abs())
        .collect()
}

pub const RECTANGLE_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct RectangleVerdict {
    /// Records where `‖u‖₁ > ‖u‖∞·|box| + threshold·|domain|`.
    pub lower_violations: usize,
    pub records_checked: usize,
    /// `‖u‖∞ · Πᵢ 2Rᵢ / ‖u₀‖₁` over the window; `max` is the empirical `γ`.
    pub upper_ratio: Interval,
    pub floor: f64,
    pub pass: bool,
}

pub fn check_rectangle_optimality(
    series: &[TimeSeriesRecord],
    ctx: &SeriesContext,
    window: (f64, f64),
) -> RectangleVerdict {
    let slack = ctx.threshold * ctx.domain_volume();
    let boxed = |r: &TimeSeriesRecord| r.linf_u * r.supp.iter().map(|s| 2.0 * s).product::<f64>();
    let lower_violations = series.iter().filter(|r| r.l1_u > boxed(r) + slack).count();
    let upper_ratio = Interval::of(in_window(series, window).map(|r| boxed(r) / ctx.initial_l1));
    RectangleVerdict {
        lower_violations,
        records_checked: series.len(),
        pass: lower_violations == 0 && upper_ratio.min >= RECTANGLE_FLOOR && upper_ratio.max.is_finite(),
        upper_ratio,
        floor: RECTANGLE_FLOOR,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    /// `"computed"` or `"refused"`.
    pub status: String,
    /// Integrability threshold reported when the bound does not apply.
    pub m_threshold: f64,
    pub sigma: f64,
    /// `P = max{α+1, p_N}`.
    pub big_p: f64,
    pub exponent: Option<f64>,
    pub shrink_power: f64,
    /// Space-time mean of `u₊^P` over the cylinder.
    pub mean_u_pos_p: f64,
    /// `((1−σ)^{shrink}·mean)^{exponent}`.
    pub bound_core: f64,
    pub sup_shrunk: f64,
    /// `sup / bound_core`, the constant the bound would need if `1` were not
    /// the larger branch of the maximum. `None` when the core vanishes.
    pub empirical_c: Option<f64>,
    /// `sup ≤ 1`, so the bound holds through its constant branch.
    pub trivially_met: bool,
}

/// Compares the supremum of `u` over `Q_{σr}` with the mean-integral
/// expression of the explicit local bound on `Q_r`.
pub fn report_boundedness_bound(
    snapshots: &[Snapshot],
    d: &DerivedExponents,
    cylinder: &Cylinder,
    sigma: f64,
    p_axes: &[f64],
) -> Result<BoundednessReport, DiagnosticsError> {
    let exponent = d.local_bound_exponent();
    let mut rep = BoundednessReport {
        status: "refused".into(),
        m_threshold: d.m_threshold,
        sigma,
        big_p: d.big_p,
        exponent,
        shrink_power: d.local_bound_shrink_power(),
        mean_u_pos_p: 0.0,
        bound_core: 0.0,
        sup_shrunk: 0.0,
        empirical_c: None,
        trivially_met: false,
    };
    if !d.flags.supercritical || exponent.is_none() {
        return Ok(rep);
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(DiagnosticsError::Refused(format!("σ must lie in (0, 1), got {sigma}")));
    }
    let spec: &GridSpec = snapshots
        .first()
        .map(|s| s.u.spec())
        .ok_or_else(|| DiagnosticsError::Refused("no snapshots".into()))?;
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let view = restrict_to_cylinder(spec, &times, cylinder).map_err(|e| DiagnosticsError::Refused(e.to_string()))?;
    let t_o = cylinder.t_hi;
    let r = cylinder.cube.r;
    let shrunk = Cylinder::intrinsic(&cylinder.cube.center, t_o, sigma * r, p_axes);
    let view_s = restrict_to_cylinder(spec, &times, &shrunk).map_err(|e| DiagnosticsError::Refused(e.to_string()))?;

    let big_p = d.big_p;
    let mut total = 0.0;
    let mut count = 0usize;
    for s in &snapshots[view.snapshots.clone()] {
        for_each_in(spec, &view.ranges, |k| {
            total += s.u.values()[k].max(0.0).powf(big_p);
            count += 1;
        });
    }
    let mut sup = 0.0f64;
    for s in &snapshots[view_s.snapshots.clone()] {
        for_each_in(spec, &view_s.ranges, |k| sup = sup.max(s.u.values()[k]));
    }
    let mean = if count > 0 { total / count as f64 } else { 0.0 };
    let core = ((1.0 - sigma).powf(rep.shrink_power) * mean).powf(exponent.unwrap());
    rep.status = "computed".into();
    rep.mean_u_pos_p = mean;
    rep.bound_core = core;
    rep.sup_shrunk = sup;
    rep.empirical_c = (core > 0.0).then(|| sup / core);
    rep.trivially_met = sup <= 1.0;
    Ok(rep)
}

/// Calls `f(flat)` for every cell in the product of index ranges.
pub(crate) fn for_each_in(spec: &GridSpec, ranges: &[std::ops::Range<usize>], mut f: impl FnMut(usize)) {
    if ranges.iter().any(|r| r.is_empty()) {
        return;
    }
    let strides = spec.strides();
    let dim = ranges.len();
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.start).collect();
    loop {
        let base: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        f(base);
        let mut i = dim;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < ranges[i].end {
                break;
            }
            idx[i] = ranges[i].start;
        }
    }
}

/// CSV header for an `N`-axis series.
pub fn csv_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["step", "t", "dt", "mass_v", "l1_u", "lalpha1_u", "linf_u"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=dim).map(|i| format!("supp_{i}")));
    h
}

/// Streaming CSV writer; floats use the shortest round-trip representation.
pub struct CsvSeriesWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvSeriesWriter<W> {
    pub fn new(w: W, dim: usize) -> Result<Self, IoError> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(csv_header(dim)).map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &TimeSeriesRecord) -> Result<(), IoError> {
        let mut row = vec![
            r.step.to_string(),
            r.t.to_string(),
            r.dt.to_string(),
            r.mass_v.to_string(),
            r.l1_u.to_string(),
            r.lalpha1_u.to_string(),
            r.linf_u.to_string(),
        ];
        row.extend(r.supp.iter().map(|s| s.to_string()));
        self.inner.write_record(&row).map_err(csv_err)
    }

    pub fn flush(&mut self) -> Result<(), IoError> {
        Ok(self.inner.flush()?)
    }
}

fn csv_err(e: csv::Error) -> IoError {
    IoError::Csv(e.to_string())
}

pub fn write_series_csv<W: Write>(w: W, series: &[TimeSeriesRecord]) -> Result<(), IoError> {
    let dim = series.first().map_or(0, |r| r.supp.len());
    let mut out = CsvSeriesWriter::new(w, dim)?;
    for r in series {
        out.write(r)?;
    }
    out.flush()
}

pub fn read_series_csv<R: Read>(r: R) -> Result<Vec<TimeSeriesRecord>, IoError> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let dim = headers.len().saturating_sub(7);
    let expected = csv_header(dim);
    if dim == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(IoError::Csv(format!(
            "expected columns {}, found {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |k: usize| -> Result<f64, IoError> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| IoError::Csv(format!("row {}: column {}: {e}", line + 1, expected[k])))
        };
        let step = rec[0]
            .parse::<u64>()
            .map_err(|e| IoError::Csv(format!("row {}: step: {e}", line + 1)))?;
        out.push(TimeSeriesRecord {
            step,
            t: num(1)?,
            dt: num(2)?,
            mass_v: num(3)?,
            l1_u: num(4)?,
            lalpha1_u: num(5)?,
            linf_u: num(6)?,
            supp: (7..7 + dim).map(num).collect::<Result<_, _>>()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;
    use crate::params::{derive, Anisotropy};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn synthetic(f: impl Fn(f64) -> f64, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|k| {
            let t = 0.1 * 10f64.powf(k as f64 / (n - 1) as f64);
            (t, f(t))
        }).collect()
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let pts = synthetic(|t| 3.0 * t.powf(-0.7), 20);
        let fit = fit_power_law(&pts, (0.0, 10.0)).unwrap();
        assert!((fit.slope + 0.7).abs() < 1e-10);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept.exp(), 3.0, max_relative = 1e-10);
        let flat = fit_power_law(&synthetic(|_| 2.0, 10), (0.0, 10.0)).unwrap();
        assert!(flat.slope.abs() < 1e-14);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let pts = synthetic(|t| t, 4);
        assert!(matches!(fit_power_law(&pts, (0.0, 10.0)), Err(DiagnosticsError::TooFewPoints { .. })));
        let mut pts = synthetic(|t| t, 8);
        pts[3].1 = 0.0;
        assert!(matches!(fit_power_law(&pts, (0.0, 10.0)), Err(DiagnosticsError::NonPositive { .. })));
    }

    fn record(t: f64, linf: f64, l1: f64, supp: Vec<f64>) -> TimeSeriesRecord {
        TimeSeriesRecord {
            step: (t * 1000.0) as u64,
            t,
            dt: 1e-3,
            mass_v: 1.0,
            l1_u: l1,
            lalpha1_u: l1,
            linf_u: linf,
            supp,
        }
    }

    #[test]
    fn ultracontractivity_on_heat_profile() {
        let d = derive(&Anisotropy::new(1.0, &[2.0, 2.0]).unwrap());
        let series: Vec<_> = (1..=40)
            .map(|k| {
                let t = 0.025 * k as f64;
                record(t, 1.0 / (4.0 * std::f64::consts::PI * t), 1.0, vec![1.0, 1.0])
            })
            .collect();
        let v = check_ultracontractivity(&series, &d, 1.0, (0.1, 1.0)).unwrap();
        assert!(v.pass);
        assert!((v.fit.slope + 1.0).abs() < 1e-10);
        assert_relative_eq!(v.prefactor.ratio(), 1.0, max_relative = 1e-10);
        let d1 = derive(&Anisotropy::new(1.0, &[1.2, 1.2, 1.2]).unwrap());
        assert!(!d1.flags.ultracontractive);
        assert!(matches!(
            check_ultracontractivity(&series, &d1, 1.0, (0.1, 1.0)),
            Err(DiagnosticsError::Refused(_))
        ));
    }

    fn ctx(p: Vec<f64>) -> SeriesContext {
        SeriesContext {
            r0: 0.1,
            initial_l1: 1.0,
            threshold: 0.0,
            half_length: vec![10.0; p.len()],
            spacing: vec![0.01; p.len()],
            p,
            aborted: false,
        }
    }

    #[test]
    fn support_law_on_exact_profile() {
        let d = derive(&Anisotropy::new(0.5, &[2.2, 2.4, 2.6]).unwrap());
        let p = vec![2.2, 2.4, 2.6];
        let c = ctx(p.clone());
        let series: Vec<_> = (1..=30)
            .map(|k| {
                let t = 0.1 * k as f64;
                let supp = p.iter().map(|&pi| 0.2 + 2.0 * t.powf(support_rate(&d, pi))).collect();
                record(t, 1.0, 1.0, supp)
            })
            .collect();
        let v = check_support_law(&series, &d, &c, (0.3, 3.0)).unwrap();
        assert!(v.pass && v.targets_ranked && v.measured_ranked);
        for a in &v.axes {
            assert!((a.fit.slope - a.target).abs() < 1e-10);
        }
        let mut aborted = c.clone();
        aborted.aborted = true;
        assert!(check_support_law(&series, &d, &aborted, (0.3, 3.0)).is_err());
        let mut big_r0 = c.clone();
        big_r0.r0 = 1.0;
        assert!(check_support_law(&series, &d, &big_r0, (0.3, 3.0)).is_err());
    }

    #[test]
    fn support_window_skips_small_supports() {
        let series: Vec<_> = (1..=20)
            .map(|k| {
                let t = 0.5 * k as f64;
                record(t, 1.0, 1.0, vec![0.1 * t, 1.0])
            })
            .collect();
        assert_eq!(default_window(&series), (1.0, 10.0));
        assert_eq!(support_window(&series, 0.05), (2.0, 10.0));
        assert_eq!(support_window(&series, 0.001), (1.0, 10.0));
    }

    fn snapshots_of(spec: &GridSpec, f: impl Fn(&[f64], f64) -> f64) -> Vec<Snapshot> {
        (0..=10)
            .map(|k| {
                let t = 0.5 + 0.05 * k as f64;
                Snapshot {
                    step: k,
                    t,
                    requested: t,
                    u: GridFunction::from_fn(spec.clone(), |x| f(x, t)),
                }
            })
            .collect()
    }

    #[test]
    fn boundedness_on_zero_and_heat_data() {
        let d = derive(&Anisotropy::new(1.0, &[2.0, 2.0]).unwrap());
        let cyl = Cylinder::intrinsic(&[0.0, 0.0], 1.0, 0.4, &[2.0, 2.0]);
        let spec = GridSpec::cube(2, 3.0, 60).unwrap();
        let zero = report_boundedness_bound(&snapshots_of(&spec, |_, _| 0.0), &d, &cyl, 0.5, &[2.0, 2.0]).unwrap();
        assert_eq!(zero.status, "computed");
        assert_eq!(zero.sup_shrunk, 0.0);
        assert_eq!(zero.empirical_c, None);
        assert!(zero.trivially_met);

        let heat = |x: &[f64], t: f64| (-(x[0] * x[0] + x[1] * x[1]) / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t);
        let c: Vec<f64> = [60, 120]
            .iter()
            .map(|&n| {
                let spec = GridSpec::cube(2, 3.0, n).unwrap();
                let r = report_boundedness_bound(&snapshots_of(&spec, heat), &d, &cyl, 0.5, &[2.0, 2.0]).unwrap();
                r.empirical_c.unwrap()
            })
            .collect();
        assert!(c.iter().all(|x| x.is_finite() && *x > 0.0));
        assert!(c[0].max(c[1]) / c[0].min(c[1]) < 2.0);
    }

    #[test]
    fn boundedness_refuses_subcritical_parameters() {
        let d = derive(&Anisotropy::new(1.0, &[1.2, 1.2, 1.2]).unwrap());
        assert!(!d.flags.supercritical);
        let cyl = Cylinder::intrinsic(&[0.0; 3], 1.0, 0.4, &[1.2; 3]);
        let spec = GridSpec::cube(3, 1.0, 8).unwrap();
        let snaps = vec![Snapshot { step: 0, t: 1.0, requested: 1.0, u: GridFunction::zeros(spec) }];
        let r = report_boundedness_bound(&snaps, &d, &cyl, 0.5, &[1.2; 3]).unwrap();
        assert_eq!(r.status, "refused");
        assert!(r.m_threshold > 0.0);
    }

    #[test]
    fn isotropic_heat_like_targets() {
        let d = derive(&Anisotropy::new(1.0, &[3.0, 3.0]).unwrap());
        assert_relative_eq!(support_rate(&d, 3.0), 0.2, max_relative = 1e-14);
    }

    #[test]
    fn rectangle_chain() {
        let c = ctx(vec![2.0, 2.0]);
        let series: Vec<_> = (1..=10)
            .map(|k| {
                let t = k as f64;
                record(t, 1.0 / t, 0.9, vec![t.sqrt(), t.sqrt()])
            })
            .collect();
        let v = check_rectangle_optimality(&series, &c, (1.0, 10.0));
        assert!(v.pass);
        assert_relative_eq!(v.upper_ratio.min, 4.0, max_relative = 1e-12);
        let mut bad = series.clone();
        bad[3].l1_u = 100.0;
        assert_eq!(check_rectangle_optimality(&bad, &c, (1.0, 10.0)).lower_violations, 1);
    }

    #[test]
    fn csv_round_trip() {
        let series = vec![
            record(0.0, 1.0, 0.5, vec![0.1, 0.2]),
            record(0.1234567890123, 0.3, 1.0 / 3.0, vec![0.15, 0.25]),
        ];
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &series).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,t,dt,mass_v,l1_u,lalpha1_u,linf_u,supp_1,supp_2\n"));
        assert_eq!(read_series_csv(&buf[..]).unwrap(), series);
        let bad = b"step,t\n1,2\n";
        assert!(read_series_csv(&bad[..]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn support_targets_decrease_in_p(
            alpha in 0.05f64..0.95,
            base in 1.05f64..3.0,
            spread in prop::collection::vec(0.0f64..0.6, 2..4),
        ) {
            let p: Vec<f64> = spread.iter().map(|s| base + alpha + s).collect();
            let d = derive(&Anisotropy::new(alpha, &p).unwrap());
            if d.flags.slow_diffusion {
                let targets: Vec<f64> = d.p.iter().map(|&pi| support_rate(&d, pi)).collect();
                prop_assert!(strictly_decreasing_in_p(&d.p, &targets));
            }
        }
    }
}
