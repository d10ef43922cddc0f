//! Uniform cell-centred tensor grids over boxes `Πᵢ[−Lᵢ, Lᵢ]`, grid
//! functions, difference operators, norms and the anisotropic geometry
//! (`K_r`, `𝕂_r`, cylinders).

use std::io::{Read, Write};
use std::ops::Range;

use serde::Serialize;

use crate::error::{GridError, IoError};
use crate::kernels::SignedPow;

/// Default cap on the total number of cells (about 1 GiB of `f64`).
pub const DEFAULT_CELL_CAP: usize = 1 << 27;

const GFB1_MAGIC: &[u8; 4] = b"GFB1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    half_length: Vec<f64>,
    cells: Vec<usize>,
    spacing: Vec<f64>,
}

impl GridSpec {
    pub fn new(half_length: &[f64], cells: &[usize]) -> Result<Self, GridError> {
        Self::with_cap(half_length, cells, DEFAULT_CELL_CAP)
    }

    pub fn with_cap(half_length: &[f64], cells: &[usize], cap: usize) -> Result<Self, GridError> {
        if half_length.len() != cells.len() || cells.is_empty() {
            return Err(GridError::Dimension {
                expected: cells.len().max(1),
                got: half_length.len(),
            });
        }
        for (axis, (&l, &n)) in half_length.iter().zip(cells).enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(GridError::HalfLength { axis, value: l });
            }
            if n < 8 || n % 2 != 0 {
                return Err(GridError::Cells { axis, cells: n });
            }
        }
        let total = cells
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .unwrap_or(usize::MAX);
        if total > cap {
            return Err(GridError::TooLarge { cells: total, cap });
        }
        let spacing = half_length
            .iter()
            .zip(cells)
            .map(|(&l, &n)| 2.0 * l / n as f64)
            .collect();
        Ok(Self {
            half_length: half_length.to_vec(),
            cells: cells.to_vec(),
            spacing,
        })
    }

    /// Same box and cell count on every axis.
    pub fn cube(dim: usize, half_length: f64, cells: usize) -> Result<Self, GridError> {
        Self::new(&vec![half_length; dim], &vec![cells; dim])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn half_length(&self) -> &[f64] {
        &self.half_length
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Row-major strides, axis 0 slowest.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for i in (0..self.dim().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.cells[i + 1];
        }
        s
    }

    /// Coordinate of the centre of cell `idx` along `axis`.
    #[inline]
    pub fn center(&self, axis: usize, idx: usize) -> f64 {
        -self.half_length[axis] + (idx as f64 + 0.5) * self.spacing[axis]
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.cells)
            .fold(0, |acc, (&k, &n)| acc * n + k)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            out[i] = flat % self.cells[i];
            flat /= self.cells[i];
        }
        out
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(i, &k)| self.center(i, k))
            .collect()
    }

    fn check_axis(&self, axis: usize) -> Result<(), GridError> {
        if axis >= self.dim() {
            Err(GridError::Axis { axis, dim: self.dim() })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != spec.len() {
            return Err(GridError::Length {
                expected: spec.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(k));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.len();
        Self {
            spec,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = spec.len();
        let dim = spec.dim();
        let mut x = vec![0.0; dim];
        let mut idx = vec![0usize; dim];
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            for i in 0..dim {
                x[i] = spec.center(i, idx[i]);
            }
            values.push(f(&x));
            for i in (0..dim).rev() {
                idx[i] += 1;
                if idx[i] < spec.cells[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        Self { spec, values }
    }

    pub(crate) fn from_parts_unchecked(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(spec.len(), values.len());
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Cell-volume-weighted sum `Σ g · Πhᵢ`.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.spec.cell_volume()
    }
}

/// Deterministic pairwise-tree sum of `f(0) + … + f(n−1)`; the split points
/// depend only on `n`.
pub fn pairwise_sum_by<F>(n: usize, f: &F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    fn rec<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, f: &F) -> f64 {
        let len = hi - lo;
        if len <= 128 {
            let mut s = 0.0;
            for k in lo..hi {
                s += f(k);
            }
            return s;
        }
        let mid = lo + len / 2;
        if len >= 1 << 16 {
            let (a, b) = rayon::join(|| rec(lo, mid, f), || rec(mid, hi, f));
            a + b
        } else {
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, n, f)
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs.len(), &|k| xs[k])
}

fn shifted_difference(g: &GridFunction, axis: usize, forward: bool) -> Result<GridFunction, GridError> {
    let spec = &g.spec;
    spec.check_axis(axis)?;
    let stride = spec.strides()[axis];
    let n = spec.cells[axis];
    let h = spec.spacing[axis];
    let vals = &g.values;
    let out = (0..vals.len())
        .map(|k| {
            let idx = (k / stride) % n;
            if forward {
                let next = if idx + 1 < n { vals[k + stride] } else { 0.0 };
                (next - vals[k]) / h
            } else {
                let prev = if idx > 0 { vals[k - stride] } else { 0.0 };
                (vals[k] - prev) / h
            }
        })
        .collect();
    Ok(GridFunction::from_parts_unchecked(spec.clone(), out))
}

/// `(g[k+eᵢ] − g[k]) / hᵢ`, with `g = 0` beyond the box.
pub fn diff_forward(g: &GridFunction, axis: usize) -> Result<GridFunction, GridError> {
    shifted_difference(g, axis, true)
}

/// `(g[k] − g[k−eᵢ]) / hᵢ`, with `g = 0` beyond the box.
pub fn diff_backward(g: &GridFunction, axis: usize) -> Result<GridFunction, GridError> {
    shifted_difference(g, axis, false)
}

/// Discrete `‖g‖_{L^q}`; `q = ∞` is accepted and forwarded to [`norm_linf`].
pub fn norm_lq(g: &GridFunction, q: f64) -> f64 {
    assert!(q >= 1.0, "norm exponent must be at least 1, got {q}");
    if q.is_infinite() {
        return norm_linf(g);
    }
    let vals = &g.values;
    let pw = SignedPow::new(q);
    let s = pairwise_sum_by(vals.len(), &|k| pw.abs_pow(vals[k]));
    (s * g.spec.cell_volume()).powf(1.0 / q)
}

pub fn norm_linf(g: &GridFunction) -> f64 {
    g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Per-axis smallest `Rᵢ` such that every cell with `|g| > threshold` lies
/// inside `Πᵢ[−Rᵢ, Rᵢ]`, cells counted with their full width (centre plus
/// `hᵢ/2`). On the even grids used here the cells next to the origin give
/// `Rᵢ = hᵢ`.
pub fn support_halfwidth(g: &GridFunction, threshold: f64) -> Vec<f64> {
    let spec = &g.spec;
    let dim = spec.dim();
    let mut lo = vec![usize::MAX; dim];
    let mut hi = vec![0usize; dim];
    let mut any = false;
    for (k, &v) in g.values.iter().enumerate() {
        if v.abs() > threshold {
            any = true;
            let m = spec.multi_index(k);
            for i in 0..dim {
                lo[i] = lo[i].min(m[i]);
                hi[i] = hi[i].max(m[i]);
            }
        }
    }
    if !any {
        return vec![0.0; dim];
    }
    (0..dim)
        .map(|i| {
            let a = spec.center(i, lo[i]).abs();
            let b = spec.center(i, hi[i]).abs();
            a.max(b) + 0.5 * spec.spacing[i]
        })
        .collect()
}

/// The hyper-rectangle `K_r = Πᵢ(−r^{1/pᵢ}, r^{1/pᵢ})` (or the plain cube
/// `𝕂_r` with all extents `r`) translated to `center`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnisotropicCube {
    pub center: Vec<f64>,
    pub r: f64,
    pub extents: Vec<f64>,
}

impl AnisotropicCube {
    pub fn intrinsic(center: &[f64], r: f64, p: &[f64]) -> Self {
        assert_eq!(center.len(), p.len());
        assert!(r > 0.0);
        Self {
            center: center.to_vec(),
            r,
            extents: p.iter().map(|&pi| r.powf(1.0 / pi)).collect(),
        }
    }

    pub fn plain(center: &[f64], r: f64) -> Self {
        assert!(r > 0.0);
        Self {
            center: center.to_vec(),
            r,
            extents: vec![r; center.len()],
        }
    }

    /// Same centre and shape with every extent multiplied by `factor`.
    pub fn shrunk(&self, factor: f64) -> Self {
        Self {
            center: self.center.clone(),
            r: self.r,
            extents: self.extents.iter().map(|e| e * factor).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.center)
            .zip(&self.extents)
            .all(|((xi, ci), e)| (xi - ci).abs() < *e)
    }
}

/// Space-time cylinder `cube × [t_lo, t_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cylinder {
    pub cube: AnisotropicCube,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Cylinder {
    /// The intrinsic backward cylinder `(x_o, t_o) + K_r × (−r, 0]`.
    pub fn intrinsic(center: &[f64], t_o: f64, r: f64, p: &[f64]) -> Self {
        Self {
            cube: AnisotropicCube::intrinsic(center, r, p),
            t_lo: t_o - r,
            t_hi: t_o,
        }
    }
}

/// Index ranges selecting a cylinder inside a grid and a snapshot series.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderView {
    pub ranges: Vec<Range<usize>>,
    pub snapshots: Range<usize>,
}

/// Cells whose centres lie inside the cube and snapshots whose times lie in
/// the window. `times` must be sorted.
pub fn restrict_to_cylinder(spec: &GridSpec, times: &[f64], cyl: &Cylinder) -> Result<CylinderView, GridError> {
    let cube = &cyl.cube;
    if cube.center.len() != spec.dim() {
        return Err(GridError::Dimension {
            expected: spec.dim(),
            got: cube.center.len(),
        });
    }
    let mut ranges = Vec::with_capacity(spec.dim());
    for axis in 0..spec.dim() {
        let h = spec.spacing[axis];
        let l = spec.half_length[axis];
        let e = cube.extents[axis];
        if e < h {
            return Err(GridError::CylinderTooSmall { axis, extent: e, spacing: h });
        }
        let lo = cube.center[axis] - e;
        let hi = cube.center[axis] + e;
        if lo <= -l || hi >= l {
            return Err(GridError::CylinderOutside { axis, lo, hi, half_length: l });
        }
        // centre of cell k is −L + (k + ½)h; keep those strictly inside (lo, hi)
        let first = ((lo + l) / h - 0.5).floor() as isize + 1;
        let last = ((hi + l) / h - 0.5).ceil() as isize - 1;
        let first = first.max(0) as usize;
        let last = (last.max(-1) + 1) as usize;
        ranges.push(first..last.min(spec.cells[axis]));
    }
    let tol = 1e-12 * (1.0 + cyl.t_hi.abs());
    let start = times.partition_point(|&t| t < cyl.t_lo - tol);
    let end = times.partition_point(|&t| t <= cyl.t_hi + tol);
    let before = times.first().is_none_or(|&t0| cyl.t_lo < t0 - tol);
    let after = times.last().is_none_or(|&t1| cyl.t_hi > t1 + tol);
    if cyl.t_hi <= cyl.t_lo || start >= end || before || after {
        return Err(GridError::TimeWindow { lo: cyl.t_lo, hi: cyl.t_hi });
    }
    Ok(CylinderView {
        ranges,
        snapshots: start..end,
    })
}

/// Writes `g` in the GFB1 binary layout.
pub fn write_gfb1<W: Write>(mut w: W, g: &GridFunction) -> Result<(), IoError> {
    let spec = g.spec();
    w.write_all(GFB1_MAGIC)?;
    w.write_all(&(spec.dim() as u32).to_le_bytes())?;
    for i in 0..spec.dim() {
        w.write_all(&(spec.cells[i] as u64).to_le_bytes())?;
        w.write_all(&spec.half_length[i].to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * g.values.len());
    for v in &g.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_gfb1<R: Read>(mut r: R) -> Result<GridFunction, IoError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != GFB1_MAGIC {
        return Err(IoError::Magic);
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let header = 8 + 16 * dim;
    if dim == 0 || bytes.len() < header {
        return Err(IoError::Length {
            expected: header,
            got: bytes.len(),
        });
    }
    let mut cells = Vec::with_capacity(dim);
    let mut half = Vec::with_capacity(dim);
    for i in 0..dim {
        let o = 8 + 16 * i;
        cells.push(u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()) as usize);
        half.push(f64::from_le_bytes(bytes[o + 8..o + 16].try_into().unwrap()));
    }
    let spec = GridSpec::new(&half, &cells)?;
    let expected = header + 8 * spec.len();
    if bytes.len() != expected {
        return Err(IoError::Length {
            expected,
            got: bytes.len(),
        });
    }
    let values = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GridFunction::new(spec, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_function(spec: GridSpec, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = spec.len();
        GridFunction::new(spec, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(&[1.0, 1.0], &[8, 8]).is_ok());
        assert!(matches!(GridSpec::new(&[1.0], &[7]), Err(GridError::Cells { .. })));
        assert!(matches!(GridSpec::new(&[1.0], &[6]), Err(GridError::Cells { .. })));
        assert!(matches!(GridSpec::new(&[0.0], &[8]), Err(GridError::HalfLength { .. })));
        assert!(matches!(GridSpec::new(&[1.0, 1.0], &[8]), Err(GridError::Dimension { .. })));
        assert!(matches!(
            GridSpec::with_cap(&[1.0, 1.0], &[64, 64], 1000),
            Err(GridError::TooLarge { .. })
        ));
    }

    #[test]
    fn index_round_trip() {
        let spec = GridSpec::new(&[1.0, 2.0, 3.0], &[8, 10, 12]).unwrap();
        for k in [0, 1, 77, 500, spec.len() - 1] {
            assert_eq!(spec.flat_index(&spec.multi_index(k)), k);
        }
        assert_eq!(spec.strides(), vec![120, 12, 1]);
    }

    #[test]
    fn forward_difference_of_linear_function() {
        let spec = GridSpec::new(&[1.0, 1.0], &[16, 16]).unwrap();
        let g = GridFunction::from_fn(spec.clone(), |x| 3.0 * x[1] - x[0]);
        let d = diff_forward(&g, 1).unwrap();
        for k in 0..spec.len() {
            if spec.multi_index(k)[1] + 1 < 16 {
                assert_relative_eq!(d.values()[k], 3.0, max_relative = 1e-12);
            }
        }
        let c = GridFunction::from_fn(spec.clone(), |_| 2.5);
        let dc = diff_forward(&c, 0).unwrap();
        for k in 0..spec.len() {
            if spec.multi_index(k)[0] + 1 < 16 {
                assert_eq!(dc.values()[k], 0.0);
            }
        }
        assert!(diff_forward(&c, 2).is_err());
    }

    #[test]
    fn forward_then_backward_is_three_point_laplacian() {
        let spec = GridSpec::new(&[1.0, 0.5], &[10, 12]).unwrap();
        let g = random_function(spec.clone(), 3);
        for axis in 0..2 {
            let dd = diff_backward(&diff_forward(&g, axis).unwrap(), axis).unwrap();
            let h = spec.spacing()[axis];
            let stride = spec.strides()[axis];
            let n = spec.cells()[axis];
            for k in 0..spec.len() {
                let i = spec.multi_index(k)[axis];
                if i == 0 {
                    // the zero-extended flux below the box is not D(g) there
                    continue;
                }
                let next = if i + 1 < n { g.values()[k + stride] } else { 0.0 };
                let prev = g.values()[k - stride];
                let expect = (next - 2.0 * g.values()[k] + prev) / (h * h);
                assert_relative_eq!(dd.values()[k], expect, epsilon = 1e-9, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn norms() {
        let spec = GridSpec::new(&[1.0, 1.0], &[8, 8]).unwrap();
        let vol = spec.cell_volume();
        let mut vals = vec![0.0; spec.len()];
        for v in vals.iter_mut().take(5) {
            *v = 1.0;
        }
        let g = GridFunction::new(spec.clone(), vals).unwrap();
        assert_relative_eq!(norm_lq(&g, 1.0), 5.0 * vol, max_relative = 1e-15);
        let r = random_function(spec.clone(), 9);
        assert_relative_eq!(norm_lq(&r.scaled(-3.0), 2.5), 3.0 * norm_lq(&r, 2.5), max_relative = 1e-13);
        assert_eq!(norm_linf(&r.scaled(-2.0)), 2.0 * norm_linf(&r));
        assert!(norm_lq(&r, 1.0) <= norm_linf(&r) * spec.len() as f64 * vol * (1.0 + 1e-15));
    }

    #[test]
    fn lq_norm_converges_under_refinement() {
        // ∫ exp(−|x|²) over the box; reference by fine quadrature (1024²)
        let sample = |n: usize| {
            let spec = GridSpec::new(&[2.0, 2.0], &[n, n]).unwrap();
            norm_lq(&GridFunction::from_fn(spec, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()), 1.5)
        };
        let exact = sample(1024);
        let errs: Vec<f64> = [32, 64, 128].iter().map(|&n| (sample(n) - exact).abs()).collect();
        assert!(errs[0] / errs[1] > 2.0 && errs[1] / errs[2] > 2.0, "{errs:?}");
    }

    #[test]
    fn discrete_divergence_theorem() {
        let spec = GridSpec::new(&[1.0, 1.0, 1.0], &[12, 12, 12]).unwrap();
        let mut flux = random_function(spec.clone(), 5).into_values();
        for k in 0..spec.len() {
            let m = spec.multi_index(k);
            if m.iter().any(|&i| !(2..10).contains(&i)) {
                flux[k] = 0.0;
            }
        }
        let f = GridFunction::new(spec.clone(), flux).unwrap();
        for axis in 0..3 {
            let div = diff_backward(&f, axis).unwrap();
            let scale = norm_lq(&f, 1.0) / spec.spacing()[axis];
            assert!(div.integral().abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn support_halfwidth_cases() {
        let spec = GridSpec::new(&[1.0, 2.0], &[8, 8]).unwrap();
        assert_eq!(support_halfwidth(&GridFunction::zeros(spec.clone()), 0.0), vec![0.0, 0.0]);
        // the four cells touching the origin
        let g = GridFunction::from_fn(spec.clone(), |x| {
            if x[0].abs() < 0.2 && x[1].abs() < 0.3 {
                1.0
            } else {
                0.0
            }
        });
        assert_eq!(support_halfwidth(&g, 0.0), vec![0.25, 0.5]);

        let spec = GridSpec::new(&[1.0, 1.0], &[64, 64]).unwrap();
        let a = 0.4;
        let b = GridFunction::from_fn(spec.clone(), |x| {
            if x.iter().all(|xi| xi.abs() <= a) {
                1.0
            } else {
                0.0
            }
        });
        for r in support_halfwidth(&b, 0.0) {
            assert!((r - a).abs() <= spec.spacing()[0]);
        }
        let central = GridSpec::new(&[1.0], &[10]).unwrap();
        let mut v = vec![0.0; 10];
        v[5] = 1.0;
        let c = GridFunction::new(central.clone(), v).unwrap();
        let h = central.spacing()[0];
        assert_relative_eq!(support_halfwidth(&c, 0.0)[0], h, max_relative = 1e-12);
    }

    #[test]
    fn cylinder_restriction() {
        let spec = GridSpec::new(&[2.0, 2.0], &[64, 64]).unwrap();
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let p = [2.0, 4.0];
        let cyl = Cylinder::intrinsic(&[0.0, 0.0], 1.0, 0.5, &p);
        let view = restrict_to_cylinder(&spec, &times, &cyl).unwrap();
        for axis in 0..2 {
            let width = view.ranges[axis].len() as f64;
            let expect = 2.0 * 0.5f64.powf(1.0 / p[axis]) / spec.spacing()[axis];
            assert!((width - expect).abs() <= 1.0, "axis {axis}: {width} vs {expect}");
        }
        assert_eq!(view.snapshots, 5..11);

        let tiny = Cylinder::intrinsic(&[0.0, 0.0], 1.0, 1e-6, &p);
        assert!(matches!(
            restrict_to_cylinder(&spec, &times, &tiny),
            Err(GridError::CylinderTooSmall { .. })
        ));
        let edge = Cylinder::intrinsic(&[1.5, 0.0], 1.0, 0.5, &p);
        assert!(matches!(
            restrict_to_cylinder(&spec, &times, &edge),
            Err(GridError::CylinderOutside { .. })
        ));
        let late = Cylinder::intrinsic(&[0.0, 0.0], 2.0, 0.5, &p);
        assert!(restrict_to_cylinder(&spec, &times, &late).is_err());
    }

    #[test]
    fn nested_cubes() {
        let p = [2.2, 2.4, 2.6];
        let small = AnisotropicCube::intrinsic(&[0.0; 3], 0.3, &p);
        let big = AnisotropicCube::intrinsic(&[0.0; 3], 0.7, &p);
        assert!(small.extents.iter().zip(&big.extents).all(|(a, b)| a < b));
        assert!(big.contains(&[0.5, 0.0, 0.0]));
        assert!(!small.contains(&[0.6, 0.0, 0.0]));
    }

    #[test]
    fn gfb1_round_trip_and_validation() {
        let spec = GridSpec::new(&[1.0, 3.0], &[8, 10]).unwrap();
        let g = random_function(spec, 1);
        let mut buf = Vec::new();
        write_gfb1(&mut buf, &g).unwrap();
        assert_eq!(&buf[..4], b"GFB1");
        assert_eq!(buf.len(), 8 + 32 + 8 * 80);
        let back = read_gfb1(&buf[..]).unwrap();
        assert_eq!(back, g);

        assert!(matches!(read_gfb1(&buf[..buf.len() - 1]), Err(IoError::Length { .. })));
        let mut longer = buf.clone();
        longer.push(0);
        assert!(matches!(read_gfb1(&longer[..]), Err(IoError::Length { .. })));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_gfb1(&bad[..]), Err(IoError::Magic)));
    }
}
