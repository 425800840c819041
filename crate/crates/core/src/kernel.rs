//! The fractional integral operator
//! `K f(x) = int |N(x) - N(y)|^{-n/b} f(y) dy` with `N(x) = sum_i |x_i|^a`,
//! evaluated on uniform cell-centred grids.
//!
//! The kernel is singular on the level set `N(y) = N(x)`. Source cells whose
//! `N`-range (widened by its own width) contains `N(x)` are split into
//! `8^n` sub-cells; sub-cells still touching the level set are integrated
//! in closed form after linearising `N` across the sub-cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REFINE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl KernelSpec {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidSpec(format!("kernel grids cover n = 2, 3 only (got {n})")));
        }
        if !(a > n as f64 && a <= b && b.is_finite()) {
            return Err(Error::InvalidSpec(format!("kernel needs n < a <= b, got n = {n}, a = {a}, b = {b}")));
        }
        Ok(KernelSpec { n, a, b })
    }

    /// Exponent `n/b` of the kernel singularity.
    pub fn gamma(&self) -> f64 {
        self.n as f64 / self.b
    }

    #[inline]
    pub fn gauge(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs().powf(self.a)).sum()
    }

    /// Upper end `b/(b-a)` of the admissible `p` range (infinite when `a = b`).
    pub fn p_upper(&self) -> f64 {
        if self.b == self.a {
            f64::INFINITY
        } else {
            self.b / (self.b - self.a)
        }
    }

    /// Homogeneity degree of `K` under `f -> f(./s)`: `n - n a / b`.
    pub fn dilation_degree(&self) -> f64 {
        let n = self.n as f64;
        n - n * self.a / self.b
    }
}

/// `q` with `1/q = 1/p - (b - a)/b`.
pub fn lebesgue_exponents(spec: &KernelSpec, p: f64) -> Result<f64> {
    let hi = spec.p_upper();
    if !(p > 1.0 && p < hi) {
        return Err(Error::RangeViolation { p, lo: 1.0, hi });
    }
    Ok(1.0 / (1.0 / p - (spec.b - spec.a) / spec.b))
}

/// Samples at the centres of a uniform grid of cells covering `[-L, L]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub n: usize,
    pub half_width: f64,
    pub spacing: f64,
    pub cells: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn sample(n: usize, half_width: f64, cells: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        if !(half_width > 0.0) || cells == 0 {
            return Err(Error::InvalidSpec("grid needs positive half-width and cell count".into()));
        }
        let spacing = 2.0 * half_width / cells as f64;
        let total = cells.pow(n as u32);
        let mut values = Vec::with_capacity(total);
        let mut x = vec![0.0; n];
        for idx in 0..total {
            cell_center(idx, n, cells, half_width, spacing, &mut x);
            let v = f(&x);
            if !v.is_finite() {
                return Err(Error::InvalidSpec("grid function must be finite".into()));
            }
            values.push(v);
        }
        Ok(GridFunction { n, half_width, spacing, cells, values })
    }

    pub fn zeros(n: usize, half_width: f64, cells: usize) -> Result<Self> {
        Self::sample(n, half_width, cells, |_| 0.0)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.n as i32)
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        cell_center(idx, self.n, self.cells, self.half_width, self.spacing, &mut x);
        x
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.cell_volume()).powf(1.0 / p)
    }

    pub fn l1_norm(&self) -> f64 {
        self.lp_norm(1.0)
    }

    /// Evaluation box: the support box dilated by 2.
    pub fn eval_half_width(&self) -> f64 {
        2.0 * self.half_width
    }
}

fn cell_center(idx: usize, n: usize, cells: usize, half_width: f64, spacing: f64, out: &mut [f64]) {
    let mut rem = idx;
    for d in (0..n).rev() {
        let i = rem % cells;
        rem /= cells;
        out[d] = -half_width + spacing * (i as f64 + 0.5);
    }
}

/// Range of `|t|^a` over `[lo, hi]`.
fn power_range(lo: f64, hi: f64, a: f64) -> (f64, f64) {
    let (al, ah) = (lo.abs().powf(a), hi.abs().powf(a));
    if lo <= 0.0 && hi >= 0.0 {
        (0.0, al.max(ah))
    } else {
        (al.min(ah), al.max(ah))
    }
}

/// `int |d + g . u|^{-gamma} du` over the box `|u_i| <= h/2`, exactly.
fn linear_cell_integral(d: f64, g: &[f64], h: f64, gamma: f64) -> f64 {
    let scale = d.abs() + g.iter().map(|v| v.abs()).sum::<f64>() * h;
    if scale == 0.0 {
        return f64::INFINITY;
    }
    // axes with negligible slope contribute a plain factor h
    let active: Vec<f64> = g.iter().copied().filter(|v| v.abs() * h > 1e-6 * scale).collect();
    let flat = (g.len() - active.len()) as i32;
    let m = active.len();
    if m == 0 {
        return d.abs().powf(-gamma) * h.powi(g.len() as i32);
    }
    let norm: f64 = (1..=m).map(|j| j as f64 - gamma).product();
    let anti = |s: f64| -> f64 {
        let mag = s.abs().powf(m as f64 - gamma) / norm;
        if m % 2 == 1 {
            mag * s.signum()
        } else {
            mag
        }
    };
    let mut total = 0.0;
    for corner in 0..(1usize << m) {
        let mut s = d;
        let mut sign = 1.0;
        for (i, gi) in active.iter().enumerate() {
            if corner & (1 << i) != 0 {
                s += gi * h / 2.0;
            } else {
                s -= gi * h / 2.0;
                sign = -sign;
            }
        }
        total += sign * anti(s);
    }
    let denom: f64 = active.iter().product();
    (total / denom).abs() * h.powi(flat)
}

/// Integral of the kernel over one source cell centred at `c` with side `h`.
fn cell_kernel(spec: &KernelSpec, target: f64, c: &[f64], h: f64) -> f64 {
    let n = spec.n;
    let gamma = spec.gamma();
    let (mut lo, mut hi) = (0.0, 0.0);
    for &ci in c {
        let (l, u) = power_range(ci - h / 2.0, ci + h / 2.0, spec.a);
        lo += l;
        hi += u;
    }
    let width = hi - lo;
    if target < lo - width || target > hi + width {
        return (target - spec.gauge(c)).abs().powf(-gamma) * h.powi(n as i32);
    }
    let sh = h / REFINE as f64;
    let mut total = 0.0;
    let mut sub = vec![0.0; n];
    let mut grad = vec![0.0; n];
    for idx in 0..REFINE.pow(n as u32) {
        let mut rem = idx;
        for d in 0..n {
            sub[d] = c[d] - h / 2.0 + sh * ((rem % REFINE) as f64 + 0.5);
            rem /= REFINE;
        }
        let (mut slo, mut shi) = (0.0, 0.0);
        for &si in &sub {
            let (l, u) = power_range(si - sh / 2.0, si + sh / 2.0, spec.a);
            slo += l;
            shi += u;
        }
        let sw = shi - slo;
        let nv = spec.gauge(&sub);
        if target >= slo - sw && target <= shi + sw {
            for d in 0..n {
                grad[d] = spec.a * sub[d].abs().powf(spec.a - 1.0) * sub[d].signum();
            }
            total += linear_cell_integral(nv - target, &grad, sh, gamma);
        } else {
            total += (target - nv).abs().powf(-gamma) * sh.powi(n as i32);
        }
    }
    total
}

/// `K f(x)` for a point inside the evaluation box.
pub fn apply_kernel(spec: &KernelSpec, f: &GridFunction, x: &[f64]) -> Result<f64> {
    if f.n != spec.n || x.len() != spec.n {
        return Err(Error::DimensionMismatch { expected: spec.n, got: x.len() });
    }
    let half_width = f.eval_half_width();
    if x.iter().any(|v| v.abs() > half_width * (1.0 + 1e-12)) {
        return Err(Error::OutsideBox { half_width });
    }
    Ok(apply_unchecked(spec, f, x))
}

fn apply_unchecked(spec: &KernelSpec, f: &GridFunction, x: &[f64]) -> f64 {
    let target = spec.gauge(x);
    let mut c = vec![0.0; spec.n];
    let mut total = 0.0;
    for (idx, &v) in f.values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        cell_center(idx, f.n, f.cells, f.half_width, f.spacing, &mut c);
        total += v * cell_kernel(spec, target, &c, f.spacing);
    }
    total
}

/// `K f` at every cell centre of the evaluation box (same spacing as `f`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelImage {
    pub grid: GridFunction,
    /// Largest value attained on the outermost layer of cells.
    pub boundary_max: f64,
}

pub fn kernel_image(spec: &KernelSpec, f: &GridFunction) -> Result<KernelImage> {
    if f.n != spec.n {
        return Err(Error::DimensionMismatch { expected: spec.n, got: f.n });
    }
    let cells = 2 * f.cells;
    let half_width = f.eval_half_width();
    let spacing = f.spacing;
    let total = cells.pow(spec.n as u32);
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut x = vec![0.0; spec.n];
            cell_center(idx, spec.n, cells, half_width, spacing, &mut x);
            apply_unchecked(spec, f, &x)
        })
        .collect();
    let grid = GridFunction { n: spec.n, half_width, spacing, cells, values };
    let boundary_max = (0..total)
        .filter(|&idx| {
            let mut rem = idx;
            (0..spec.n).any(|_| {
                let i = rem % cells;
                rem /= cells;
                i == 0 || i + 1 == cells
            })
        })
        .map(|idx| grid.values[idx])
        .fold(0.0, f64::max);
    Ok(KernelImage { grid, boundary_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRatio {
    pub p: f64,
    pub q: f64,
    pub lp: f64,
    pub lq: f64,
    pub ratio: f64,
    /// Set when `f` vanishes and the ratio is reported as 0.
    pub zero_input: bool,
}

/// `||K f||_q / ||f||_p` with `q` from [`lebesgue_exponents`].
pub fn norm_ratio(spec: &KernelSpec, f: &GridFunction, p: f64) -> Result<NormRatio> {
    let q = lebesgue_exponents(spec, p)?;
    let lp = f.lp_norm(p);
    if lp == 0.0 {
        return Ok(NormRatio { p, q, lp, lq: 0.0, ratio: 0.0, zero_input: true });
    }
    let image = kernel_image(spec, f)?;
    let lq = image.grid.lp_norm(q);
    Ok(NormRatio { p, q, lp, lq, ratio: lq / lp, zero_input: false })
}

/// Ratios for `f_s(y) = f(y/s)` sampled on grids scaled with `s`.
pub fn dilation_family(
    spec: &KernelSpec,
    f: impl Fn(&[f64]) -> f64 + Sync,
    half_width: f64,
    cells: usize,
    p: f64,
    scales: &[f64],
) -> Result<Vec<(f64, NormRatio)>> {
    scales
        .iter()
        .map(|&s| {
            let g = GridFunction::sample(spec.n, s * half_width, cells, |y| {
                let z: Vec<f64> = y.iter().map(|v| v / s).collect();
                f(&z)
            })?;
            Ok((s, norm_ratio(spec, &g, p)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeReport {
    pub l1: f64,
    pub s: Vec<f64>,
    pub measure: Vec<f64>,
    pub bound: Vec<f64>,
    /// Constant fitted at the smallest `s`.
    pub constant: f64,
    /// Slope of log-measure against log `s` where the measure is positive.
    pub fitted_exponent: Option<f64>,
    /// Largest `measure(s) (s / ||f||_1)^{b/a}` over the grid, relative to `constant`.
    pub constant_growth: f64,
    pub holds: bool,
}

/// Superlevel measures `|{K f > s}|` against `C (||f||_1 / s)^{b/a}`.
pub fn weak_type_probe(spec: &KernelSpec, f: &GridFunction, s_grid: &[f64]) -> Result<WeakTypeReport> {
    if f.values.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidSpec("weak-type probe needs a nonnegative input".into()));
    }
    if s_grid.is_empty() || s_grid.iter().any(|s| !(*s > 0.0)) || s_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec("s grid must be positive and increasing".into()));
    }
    let l1 = f.l1_norm();
    let r = spec.b / spec.a;
    if l1 == 0.0 {
        return Ok(WeakTypeReport {
            l1,
            s: s_grid.to_vec(),
            measure: vec![0.0; s_grid.len()],
            bound: vec![0.0; s_grid.len()],
            constant: 0.0,
            fitted_exponent: None,
            constant_growth: 1.0,
            holds: true,
        });
    }
    let image = kernel_image(spec, f)?;
    if s_grid[0] <= image.boundary_max {
        return Err(Error::InsufficientData(format!(
            "superlevel set at s = {} reaches the evaluation box edge (max there {:.4e})",
            s_grid[0], image.boundary_max
        )));
    }
    let vol = image.grid.cell_volume();
    let measure: Vec<f64> = s_grid
        .iter()
        .map(|s| image.grid.values.iter().filter(|v| **v > *s).count() as f64 * vol)
        .collect();
    let constant = measure[0] / (l1 / s_grid[0]).powf(r);
    let bound: Vec<f64> = s_grid.iter().map(|s| constant * (l1 / s).powf(r)).collect();
    let holds = measure.iter().zip(&bound).all(|(m, b)| *m <= b * (1.0 + 1e-12));
    let constant_growth = s_grid
        .iter()
        .zip(&measure)
        .map(|(s, m)| m / (l1 / s).powf(r))
        .fold(0.0, f64::max)
        / constant;
    let pts: Vec<(f64, f64)> = s_grid
        .iter()
        .zip(&measure)
        .filter(|(_, m)| **m > 0.0)
        .map(|(s, m)| (s.ln(), m.ln()))
        .collect();
    let fitted_exponent = (pts.len() >= 2).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        crate::decay::linear_fit(&x, &y).0
    });
    Ok(WeakTypeReport { l1, s: s_grid.to_vec(), measure, bound, constant, fitted_exponent, constant_growth, holds })
}

/// Fewest grid cells a superlevel set may occupy and still count as resolved.
const MIN_LEVEL_CELLS: usize = 16;

/// Geometric `s` grid from just above the box-edge maximum of `K f` up to
/// the level whose superlevel set still covers [`MIN_LEVEL_CELLS`] cells.
pub fn resolvable_s_grid(spec: &KernelSpec, f: &GridFunction, count: usize) -> Result<Vec<f64>> {
    let image = kernel_image(spec, f)?;
    let mut sorted = image.grid.values.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let lo = image.boundary_max * 1.05;
    let hi = sorted.get(MIN_LEVEL_CELLS).copied().unwrap_or(0.0);
    if !(hi > lo) || count < 2 {
        return Err(Error::InsufficientData("no resolvable superlevel range".into()));
    }
    Ok((0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma_fn(x: f64) -> f64 {
        statrs::function::gamma::gamma(x)
    }

    /// Volume of `{N <= 1}`.
    fn ball_volume(n: usize, a: f64) -> f64 {
        (2.0 * gamma_fn(1.0 + 1.0 / a)).powi(n as i32) / gamma_fn(1.0 + n as f64 / a)
    }

    /// Tanh-sinh quadrature on `[lo, hi]`, tolerant of endpoint singularities.
    fn tanh_sinh(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let h = 1.0 / 64.0;
        let mut total = 0.0;
        for k in -400i32..=400 {
            let t = k as f64 * h;
            let u = std::f64::consts::FRAC_PI_2 * t.sinh();
            let x = u.tanh();
            let w = std::f64::consts::FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
            let dist = r * (1.0 - x.abs());
            if dist <= 0.0 {
                continue;
            }
            let v = f(c + r * x);
            // nodes that round onto a singular endpoint carry negligible weight
            if v.is_finite() {
                total += w * v;
            }
        }
        total * h * r
    }

    /// `K g(N(.))(x)` through the pushforward of Lebesgue measure under `N`.
    fn radial_oracle(spec: &KernelSpec, g: &dyn Fn(f64) -> f64, x: &[f64]) -> f64 {
        let n = spec.n as f64;
        let nx = spec.gauge(x);
        let dens = |v: f64| ball_volume(spec.n, spec.a) * n / spec.a * v.powf(n / spec.a - 1.0);
        let f = |v: f64| g(v) * dens(v) * (nx - v).abs().powf(-spec.gamma());
        if nx <= 0.0 || nx >= 1.0 {
            tanh_sinh(&f, 0.0, 1.0)
        } else {
            tanh_sinh(&f, 0.0, nx) + tanh_sinh(&f, nx, 1.0)
        }
    }

    #[test]
    fn lebesgue_exponent_examples() {
        let k = KernelSpec::new(2, 3.0, 6.0).unwrap();
        assert!((lebesgue_exponents(&k, 4.0 / 3.0).unwrap() - 4.0).abs() < 1e-12);
        let k = KernelSpec::new(2, 3.0, 12.0).unwrap();
        assert!((lebesgue_exponents(&k, 8.0 / 7.0).unwrap() - 8.0).abs() < 1e-12);
        let k = KernelSpec::new(2, 3.0, 3.0).unwrap();
        assert_eq!(lebesgue_exponents(&k, 1.7).unwrap(), 1.7);
        let k = KernelSpec::new(2, 3.0, 6.0).unwrap();
        assert!(matches!(lebesgue_exponents(&k, 2.0), Err(Error::RangeViolation { hi, .. }) if hi == 2.0));
        assert!(KernelSpec::new(2, 2.0, 6.0).is_err());
        assert!(KernelSpec::new(2, 4.0, 3.0).is_err());
    }

    #[test]
    fn exponent_relation_matches_dilation_degree() {
        // ||K f_s||_q = s^{deg + n/q} ||K f||_q and ||f_s||_p = s^{n/p} ||f||_p
        for (a, b, p) in [(3.0, 6.0, 4.0 / 3.0), (3.0, 12.0, 8.0 / 7.0), (4.0, 5.0, 2.0)] {
            let k = KernelSpec::new(2, a, b).unwrap();
            let q = lebesgue_exponents(&k, p).unwrap();
            assert!((k.dilation_degree() + 2.0 / q - 2.0 / p).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_cell_integral_matches_direct_sum() {
        let (d, g, h, gamma) = (0.01, [0.7, -0.4], 0.1, 1.0 / 3.0);
        let exact = linear_cell_integral(d, &g, h, gamma);
        let m = 2000;
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let u = -h / 2.0 + h * (i as f64 + 0.5) / m as f64;
                let v = -h / 2.0 + h * (j as f64 + 0.5) / m as f64;
                acc += (d + g[0] * u + g[1] * v).abs().powf(-gamma);
            }
        }
        let approx = acc * (h / m as f64).powi(2);
        assert!((exact - approx).abs() < 1e-3 * exact, "{exact} vs {approx}");
        let flat = linear_cell_integral(0.5, &[0.0, 0.0], 0.1, gamma);
        assert!((flat - 0.5f64.powf(-gamma) * 0.01).abs() < 1e-15);
    }

    #[test]
    fn zero_input_gives_zero() {
        let k = KernelSpec::new(2, 3.0, 6.0).unwrap();
        let f = GridFunction::zeros(2, 1.0, 16).unwrap();
        assert_eq!(apply_kernel(&k, &f, &[0.3, 0.1]).unwrap(), 0.0);
        let r = norm_ratio(&k, &f, 4.0 / 3.0).unwrap();
        assert!(r.zero_input && r.ratio == 0.0);
        let w = weak_type_probe(&k, &f, &[1.0, 2.0]).unwrap();
        assert!(w.holds && w.measure.iter().all(|m| *m == 0.0));
        assert!(matches!(apply_kernel(&k, &f, &[2.5, 0.0]), Err(Error::OutsideBox { .. })));
    }

    #[test]
    fn ball_at_origin_matches_closed_form() {
        // int_{N <= 1} N^{-n/b} dy = |B_a| b / (b - a)
        let k = KernelSpec::new(2, 3.0, 6.0).unwrap();
        let f = GridFunction::sample(2, 1.0, 200, |y| if k.gauge(y) <= 1.0 { 1.0 } else { 0.0 }).unwrap();
        let got = apply_kernel(&k, &f, &[0.0, 0.0]).unwrap();
        let expect = ball_volume(2, 3.0) * 6.0 / 3.0;
        assert!((got - expect).abs() < 1e-2 * expect, "{got} vs {expect}");
    }

    #[test]
    fn smooth_radial_input_matches_pushforward_oracle() {
        let k = KernelSpec::new(2, 3.0, 6.0).unwrap();
        let g = |v: f64| if v < 1.0 { (1.0 - v).powi(3) } else { 0.0 };
        let f = GridFunction::sample(2, 1.0, 80, |y| g(k.gauge(y))).unwrap();
        for x in [[0.0, 0.0], [0.5, 0.2], [0.7, -0.7], [1.3, 0.4]] {
            let got = apply_kernel(&k, &f, &x).unwrap();
            let expect = radial_oracle(&k, &g, &x);
            assert!((got - expect).abs() < 2e-3 * expect, "x = {x:?}: {got} vs {expect}");
        }
    }

    #[test]
    fn radial_symmetry_and_monotonicity() {
        let k = KernelSpec::new(2, 3.0, 12.0).unwrap();
        let f = GridFunction::sample(2, 1.0, 40, |y| (1.0 - k.gauge(y)).max(0.0)).unwrap();
        let g = GridFunction::sample(2, 1.0, 40, |y| 2.0 * (1.0 - k.gauge(y)).max(0.0) + 0.1).unwrap();
        let a = apply_kernel(&k, &f, &[0.5, 0.3]).unwrap();
        let b = apply_kernel(&k, &f, &[-0.3, 0.5]).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        assert!(apply_kernel(&k, &g, &[0.5, 0.3]).unwrap() >= a);
    }
}
