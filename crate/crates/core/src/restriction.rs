//! The operator `T f(x) = int e^{i sum_j x_j^{alpha_j} y_j^m} f(y) dy` on
//! separable inputs, its L^2 trace on the unit sphere, Knapp-type rectangle
//! experiments and the exact exponent bookkeeping.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decay::linear_fit;
use crate::error::{Error, Result};
use crate::numerics::{composite_nodes, gauss_legendre, ipow};
use crate::oscquad::{oscillatory_1d, sphere_area, Profile1D, QuadratureConfig};
use crate::phase::OperatorSpec;

/// `coefficient * prod_j f_j(y_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableFunction {
    pub coefficient: f64,
    pub profiles: Vec<Profile1D>,
}

impl SeparableFunction {
    pub fn new(profiles: Vec<Profile1D>) -> Result<Self> {
        Self::scaled(1.0, profiles)
    }

    pub fn scaled(coefficient: f64, profiles: Vec<Profile1D>) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::InvalidSpec("coefficient must be finite".into()));
        }
        for p in &profiles {
            p.validate()?;
        }
        Ok(SeparableFunction { coefficient, profiles })
    }

    /// Isotropic Gaussian `exp(-|y|^2 / sigma^2)`.
    pub fn gaussian(n: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![Profile1D::Gaussian { sigma, center: 0.0 }; n])
    }

    pub fn n(&self) -> usize {
        self.profiles.len()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.coefficient.abs()
            * self
                .profiles
                .iter()
                .map(|q| q.abs_power_integral(p).powf(1.0 / p))
                .product::<f64>()
    }

    fn check(&self, op: &OperatorSpec) -> Result<()> {
        if self.n() != op.n() {
            return Err(Error::DimensionMismatch { expected: op.n(), got: self.n() });
        }
        Ok(())
    }
}

/// `T f(x)` as a product of one-dimensional transforms.
pub fn apply_t(op: &OperatorSpec, f: &SeparableFunction, x: &[f64], quad: &QuadratureConfig) -> Result<Complex64> {
    f.check(op)?;
    if x.len() != op.n() {
        return Err(Error::DimensionMismatch { expected: op.n(), got: x.len() });
    }
    let mut out = Complex64::new(f.coefficient, 0.0);
    for ((p, &a), &xj) in f.profiles.iter().zip(op.alpha()).zip(x) {
        out *= oscillatory_1d(p, ipow(xj, a as i32), op.m(), quad)?;
    }
    Ok(out)
}

/// Memoised `F_j(c) = int e^{i c y^m} f_j(y) dy`; coordinates with equal
/// profiles share a table, and real profiles use `F(-c) = conj F(c)`.
struct TransformCache<'a> {
    f: &'a SeparableFunction,
    m: u32,
    quad: &'a QuadratureConfig,
    group: Vec<usize>,
    tables: Vec<HashMap<u64, Complex64>>,
}

impl<'a> TransformCache<'a> {
    fn new(f: &'a SeparableFunction, m: u32, quad: &'a QuadratureConfig) -> Self {
        let group = (0..f.n())
            .map(|j| (0..=j).find(|&i| f.profiles[i] == f.profiles[j]).unwrap_or(j))
            .collect();
        TransformCache { f, m, quad, group, tables: vec![HashMap::new(); f.n()] }
    }

    fn key(&self, j: usize, c: f64) -> (f64, bool) {
        if self.f.profiles[j].is_real() {
            (c.abs(), c < 0.0)
        } else {
            (c, false)
        }
    }

    fn prefetch(&mut self, j: usize, coeffs: impl Iterator<Item = f64>) -> Result<()> {
        let g = self.group[j];
        let mut missing: Vec<f64> = coeffs
            .map(|c| self.key(j, c).0)
            .filter(|k| !self.tables[g].contains_key(&k.to_bits()))
            .collect();
        missing.sort_by(f64::total_cmp);
        missing.dedup();
        let profile = self.f.profiles[g];
        let (m, quad) = (self.m, self.quad);
        let values: Vec<Complex64> = missing
            .par_iter()
            .map(|&c| oscillatory_1d(&profile, c, m, quad))
            .collect::<Result<_>>()?;
        self.tables[g].extend(missing.iter().map(|c| c.to_bits()).zip(values));
        Ok(())
    }

    fn get(&self, j: usize, c: f64) -> Complex64 {
        let (k, conj) = self.key(j, c);
        let v = self.tables[self.group[j]][&k.to_bits()];
        if conj {
            v.conj()
        } else {
            v
        }
    }
}

/// `|T f|^2` at each point.
fn squared_modulus(cache: &mut TransformCache, op: &OperatorSpec, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let alpha = op.alpha();
    for (j, &a) in alpha.iter().enumerate() {
        cache.prefetch(j, points.iter().map(|x| ipow(x[j], a as i32)))?;
    }
    let k2 = cache.f.coefficient * cache.f.coefficient;
    Ok(points
        .iter()
        .map(|x| {
            k2 * alpha
                .iter()
                .enumerate()
                .map(|(j, &a)| cache.get(j, ipow(x[j], a as i32)).norm_sqr())
                .product::<f64>()
        })
        .collect())
}

/// `(int_{S^{n-1}} |T f|^2 d sigma)^{1/2}`, certified by node doubling.
pub fn sphere_l2_norm(op: &OperatorSpec, f: &SeparableFunction, quad: &QuadratureConfig) -> Result<f64> {
    f.check(op)?;
    quad.validate()?;
    if f.coefficient == 0.0 {
        return Ok(0.0);
    }
    let mut cache = TransformCache::new(f, op.m(), quad);
    let tol = |v: f64| quad.tolerance(Complex64::new(v, 0.0));
    match op.n() {
        2 => {
            let ring = |count: usize, offset: f64| -> Vec<Vec<f64>> {
                (0..count)
                    .map(|i| {
                        let (s, c) = (2.0 * PI * (i as f64 + offset) / count as f64).sin_cos();
                        vec![c, s]
                    })
                    .collect()
            };
            let mut count = quad.base_nodes;
            let mut sum: f64 = squared_modulus(&mut cache, op, &ring(count, 0.0))?.iter().sum();
            loop {
                let coarse = sum * 2.0 * PI / count as f64;
                sum += squared_modulus(&mut cache, op, &ring(count, 0.5))?.iter().sum::<f64>();
                count *= 2;
                let fine = sum * 2.0 * PI / count as f64;
                if (fine - coarse).abs() <= tol(fine) {
                    return Ok(fine.sqrt());
                }
                if 2 * count > quad.max_nodes {
                    return Err(Error::NotConverged { estimate: (fine - coarse).abs(), nodes: count });
                }
            }
        }
        3 => {
            const ORDER: usize = 16;
            let rule = gauss_legendre(ORDER);
            let mut panels = (quad.base_nodes / ORDER).max(1);
            let mut n_phi = quad.base_nodes;
            let mut level = |panels: usize, n_phi: usize| -> Result<f64> {
                let polar = composite_nodes(&rule, 0.0, PI, panels);
                let mut points = Vec::with_capacity(polar.len() * n_phi);
                let mut weights = Vec::with_capacity(polar.len() * n_phi);
                for &(theta, w) in &polar {
                    let (st, ct) = theta.sin_cos();
                    for k in 0..n_phi {
                        let (sp, cp) = (2.0 * PI * k as f64 / n_phi as f64).sin_cos();
                        points.push(vec![st * cp, st * sp, ct]);
                        weights.push(w * st * 2.0 * PI / n_phi as f64);
                    }
                }
                let vals = squared_modulus(&mut cache, op, &points)?;
                Ok(vals.iter().zip(&weights).map(|(v, w)| v * w).sum())
            };
            let mut coarse = level(panels, n_phi)?;
            loop {
                panels *= 2;
                n_phi *= 2;
                let fine = level(panels, n_phi)?;
                if (fine - coarse).abs() <= tol(fine) {
                    return Ok(fine.sqrt());
                }
                if panels * ORDER * n_phi * 4 > quad.max_nodes {
                    return Err(Error::NotConverged {
                        estimate: (fine - coarse).abs(),
                        nodes: panels * ORDER * n_phi,
                    });
                }
                coarse = fine;
            }
        }
        n => Err(Error::InvalidSpec(format!("sphere quadrature covers n = 2, 3 only (got {n})"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub p: f64,
    /// `p <= p_sufficient`; ratios outside the proven range are only reported.
    pub within_theorem: bool,
    pub sphere_norms: Vec<f64>,
    pub lp_norms: Vec<f64>,
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
    pub argmax: usize,
    pub min_ratio: f64,
}

/// `||T f||_{L^2(S^{n-1})} / ||f||_p` across a family.
pub fn restriction_ratio(
    op: &OperatorSpec,
    family: &[SeparableFunction],
    p: f64,
    quad: &QuadratureConfig,
) -> Result<RatioReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::RangeViolation { p, lo: 1.0, hi: f64::INFINITY });
    }
    if family.is_empty() {
        return Err(Error::InsufficientData("empty test family".into()));
    }
    let bounds = admissible_bounds(op)?;
    let mut sphere_norms = Vec::with_capacity(family.len());
    let mut lp_norms = Vec::with_capacity(family.len());
    let mut ratios = Vec::with_capacity(family.len());
    for f in family {
        let s = sphere_l2_norm(op, f, quad)?;
        let l = f.lp_norm(p);
        sphere_norms.push(s);
        lp_norms.push(l);
        ratios.push(if l == 0.0 { 0.0 } else { s / l });
    }
    let (argmax, sup_ratio) = ratios
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RatioReport {
        p,
        within_theorem: !op.is_out_of_theorem() && p <= bounds.p_sufficient.value(),
        sphere_norms,
        lp_norms,
        ratios,
        sup_ratio,
        argmax,
        min_ratio,
    })
}

/// Square-root of the sphere area: the `p = 1` bound `||T f|| <= |S|^{1/2} ||f||_1`.
pub fn trivial_bound(n: usize) -> f64 {
    sphere_area(n).sqrt()
}

/// A critical exponent that may be absent (no constraint).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PBound {
    Finite(Ratio<i64>),
    Unbounded,
}

impl PBound {
    pub fn value(&self) -> f64 {
        match self {
            PBound::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            PBound::Unbounded => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<Ratio<i64>> {
        match self {
            PBound::Finite(r) => Some(*r),
            PBound::Unbounded => None,
        }
    }

    fn le(&self, other: &PBound) -> bool {
        match (self, other) {
            (_, PBound::Unbounded) => true,
            (PBound::Unbounded, PBound::Finite(_)) => false,
            (PBound::Finite(a), PBound::Finite(b)) => a <= b,
        }
    }
}

impl fmt::Display for PBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PBound::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            PBound::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl std::str::FromStr for PBound {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "unbounded" {
            return Ok(PBound::Unbounded);
        }
        let bad = || Error::InvalidSpec(format!("not a rational: {s}"));
        let (a, b) = s.split_once('/').unwrap_or((s, "1"));
        let (a, b): (i64, i64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if b == 0 {
            return Err(bad());
        }
        Ok(PBound::Finite(Ratio::new(a, b)))
    }
}

impl Serialize for PBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `2 K / (2 K - (n - 1) m)` with `K = 2 + S`, unbounded when the denominator is not positive.
fn knapp_critical_p(n: usize, s: u32, m: u32) -> PBound {
    let k = 2 * (2 + s as i64);
    let den = k - (n as i64 - 1) * m as i64;
    if den <= 0 {
        PBound::Unbounded
    } else {
        PBound::Finite(Ratio::new(k, den))
    }
}

/// Sum of the exponents other than `pivot`.
pub fn complementary_sum(op: &OperatorSpec, pivot: usize) -> u32 {
    op.alpha().iter().enumerate().filter(|(j, _)| *j != pivot).map(|(_, a)| a).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n: usize,
    pub alpha: Vec<u32>,
    pub m: u32,
    pub p_sufficient: PBound,
    /// Uses the smallest complementary sum over pivots.
    pub p_necessary: PBound,
    /// Critical exponent of each pivot's rectangle.
    pub per_pivot: Vec<PBound>,
    /// The most restrictive pivot, i.e. the minimum over `per_pivot`.
    pub p_necessary_strongest: PBound,
    /// `p_necessary - p_sufficient`; absent when unbounded.
    pub gap: Option<f64>,
    pub in_theorem_range: bool,
    pub consistent: bool,
}

pub fn admissible_bounds(op: &OperatorSpec) -> Result<BoundsReport> {
    let n = op.n();
    let m = op.m();
    let top = 2 * n as i64 * op.alpha_max() as i64;
    let den = top - m as i64;
    if den <= 0 {
        return Err(Error::InvalidSpec(format!(
            "sufficient exponent undefined: 2nα_max - m = {den} <= 0"
        )));
    }
    let p_sufficient = PBound::Finite(Ratio::new(top, den));
    let sums: Vec<u32> = (0..n).map(|i| complementary_sum(op, i)).collect();
    let s_min = *sums.iter().min().expect("n >= 2");
    let p_necessary = knapp_critical_p(n, s_min, m);
    let per_pivot: Vec<PBound> = sums.iter().map(|&s| knapp_critical_p(n, s, m)).collect();
    let p_necessary_strongest = *per_pivot
        .iter()
        .reduce(|a, b| if a.le(b) { a } else { b })
        .expect("n >= 2");
    let gap = p_necessary
        .finite()
        .map(|r| r - p_sufficient.finite().expect("finite"))
        .map(|r| *r.numer() as f64 / *r.denom() as f64);
    Ok(BoundsReport {
        n,
        alpha: op.alpha().to_vec(),
        m,
        p_sufficient,
        p_necessary,
        per_pivot,
        p_necessary_strongest,
        gap,
        in_theorem_range: !op.is_out_of_theorem(),
        consistent: p_sufficient.le(&p_necessary),
    })
}

/// `n + 1 - 2K/m - 2 + 2K/(p m)` with `K = 2 + S_pivot`: the power of `delta`
/// left after comparing both sides of the rectangle estimate. Boundedness as
/// `delta -> 0` needs it to be nonnegative.
pub fn constraint_exponent(op: &OperatorSpec, pivot: usize, p: Ratio<i64>) -> Ratio<i64> {
    let n = op.n() as i64;
    let m = op.m() as i64;
    let k = 2 + complementary_sum(op, pivot) as i64;
    Ratio::from_integer(n + 1) - Ratio::new(2 * k, m) - Ratio::from_integer(2) + Ratio::new(2 * k, m) / p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnappConfig {
    pub op: OperatorSpec,
    /// Rectangle constant.
    pub c: f64,
    /// Interval constants, one per coordinate.
    pub c_j: Vec<f64>,
    /// Zero-based coordinate held near 1.
    pub pivot: usize,
}

/// Largest admissible phase excursion on the rectangle.
const PHASE_LIMIT: f64 = PI / 3.0;

impl KnappConfig {
    /// `c = 0.1` and each `c_j` the largest power of two (at most 1) keeping
    /// the phase within half of `pi/3` up to `delta_max`.
    pub fn with_defaults(op: OperatorSpec, pivot: usize, delta_max: f64) -> Result<Self> {
        if pivot >= op.n() {
            return Err(Error::InvalidSpec(format!("pivot {pivot} out of range for n = {}", op.n())));
        }
        check_delta(delta_max)?;
        let mut cfg = KnappConfig { c: 0.1, c_j: vec![1.0; op.n()], op, pivot };
        for j in 0..cfg.op.n() {
            for _ in 0..60 {
                if cfg.phase_excursion(j, delta_max) <= PHASE_LIMIT / 2.0 {
                    break;
                }
                cfg.c_j[j] /= 2.0;
            }
        }
        Ok(cfg)
    }

    /// Exponent `e_j` with `|E_j| = 2 c_j delta^{-e_j}`.
    fn interval_exponent(&self, j: usize) -> f64 {
        let m = self.op.m() as f64;
        if j == self.pivot {
            2.0 / m
        } else {
            self.op.alpha()[j] as f64 / m
        }
    }

    pub fn half_length(&self, j: usize, delta: f64) -> f64 {
        self.c_j[j] * delta.powf(-self.interval_exponent(j))
    }

    /// Range of `x_j` on the rectangle.
    pub fn side(&self, j: usize, delta: f64) -> (f64, f64) {
        if j == self.pivot {
            (1.0 - self.c * delta * delta, 1.0 + self.c * delta * delta)
        } else {
            (-self.c * delta, self.c * delta)
        }
    }

    /// Supremum of the phase `|(x_j^{alpha_j} - [j = pivot]) y_j^m|` over the rectangle and `E_j`.
    pub fn phase_excursion(&self, j: usize, delta: f64) -> f64 {
        let a = self.op.alpha()[j] as i32;
        let ym = ipow(self.half_length(j, delta), self.op.m() as i32);
        if j == self.pivot {
            let u = self.c * delta * delta;
            ((1.0 + u).powi(a) - 1.0).max(1.0 - (1.0 - u).powi(a)) * ym
        } else {
            (self.c * delta).powi(a) * ym
        }
    }

    pub fn validate(&self, deltas: &[f64]) -> Result<()> {
        if self.c_j.len() != self.op.n() || self.pivot >= self.op.n() {
            return Err(Error::DimensionMismatch { expected: self.op.n(), got: self.c_j.len() });
        }
        if !(self.c > 0.0) || self.c_j.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::InvalidSpec("Knapp constants must be positive".into()));
        }
        for &d in deltas {
            check_delta(d)?;
            for j in 0..self.op.n() {
                let e = self.phase_excursion(j, d);
                if e > PHASE_LIMIT {
                    return Err(Error::InvalidSpec(format!(
                        "phase bound violated on coordinate {j} at delta = {d}: {e:.4} > pi/3"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn test_function(&self, delta: f64) -> SeparableFunction {
        let profiles = (0..self.op.n())
            .map(|j| {
                let h = self.half_length(j, delta);
                if j == self.pivot {
                    Profile1D::ModulatedIndicator { lo: -h, hi: h, m: self.op.m() }
                } else {
                    Profile1D::Indicator { lo: -h, hi: h }
                }
            })
            .collect();
        SeparableFunction { coefficient: 1.0, profiles }
    }
}

fn check_delta(d: f64) -> Result<()> {
    if !(d > 0.0 && d < 0.5) {
        return Err(Error::InvalidSpec(format!("delta = {d} must lie in (0, 1/2)")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnappPoint {
    pub delta: f64,
    pub lhs: f64,
    /// `||f||_p^p`.
    pub norm: f64,
    /// Minimum over rectangle nodes and coordinates of `|F_j| / (c_j delta^{-e_j})`.
    pub lower_bound_margin: f64,
    /// Same with `Re F_j` in place of `|F_j|`.
    pub cosine_margin: f64,
    pub nodes_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnappReport {
    pub config: KnappConfig,
    pub p: PBound,
    pub points: Vec<KnappPoint>,
    pub fitted_lhs_exponent: f64,
    pub predicted_lhs_exponent: f64,
    pub fitted_norm_exponent: f64,
    pub predicted_norm_exponent: f64,
    pub lower_bounds_hold: bool,
    /// Pivot's critical exponent, where the constraint exponent vanishes.
    pub critical_p: PBound,
    pub constraint_at_critical: Option<PBound>,
    pub sign_change: bool,
    pub pass: bool,
}

pub const LHS_TOL: f64 = 0.1;
pub const NORM_TOL: f64 = 0.05;

/// `int_{R_delta} |T f|^2` and the node-level lower-bound margins. The
/// integrand is a product over coordinates, so the tensor Gauss rule is a
/// product of one-dimensional rules.
fn rectangle_lhs(cfg: &KnappConfig, delta: f64, quad: &QuadratureConfig) -> Result<KnappPoint> {
    let f = cfg.test_function(delta);
    let n = cfg.op.n();
    let m = cfg.op.m();
    let axis = |j: usize, order: usize| -> Result<(f64, f64, f64)> {
        let (lo, hi) = cfg.side(j, delta);
        let bound = cfg.half_length(j, delta);
        let a = cfg.op.alpha()[j] as i32;
        let mut integral = 0.0;
        let (mut lower, mut cosine) = (f64::INFINITY, f64::INFINITY);
        for (x, w) in composite_nodes(&gauss_legendre(order), lo, hi, 1) {
            let v = oscillatory_1d(&f.profiles[j], ipow(x, a), m, quad)?;
            integral += w * v.norm_sqr();
            lower = lower.min(v.norm() / bound);
            cosine = cosine.min(v.re / bound);
        }
        Ok((integral, lower, cosine))
    };
    let mut order = 8;
    let mut prev: Option<f64> = None;
    loop {
        let axes: Vec<(f64, f64, f64)> = (0..n).map(|j| axis(j, order)).collect::<Result<_>>()?;
        let lhs: f64 = axes.iter().map(|a| a.0).product();
        if let Some(p) = prev {
            if (lhs - p).abs() <= quad.rel_tol * lhs.abs() {
                return Ok(KnappPoint {
                    delta,
                    lhs,
                    norm: f.lp_norm(1.0),
                    lower_bound_margin: axes.iter().map(|a| a.1).fold(f64::INFINITY, f64::min),
                    cosine_margin: axes.iter().map(|a| a.2).fold(f64::INFINITY, f64::min),
                    nodes_per_axis: order,
                });
            }
        }
        if order >= 256 {
            return Err(Error::NotConverged { estimate: lhs, nodes: order });
        }
        prev = Some(lhs);
        order *= 2;
    }
}

/// Rectangle experiment over `deltas`; `p` defaults to the pivot's critical exponent.
pub fn knapp_experiment(
    cfg: &KnappConfig,
    deltas: &[f64],
    p: Option<Ratio<i64>>,
    quad: &QuadratureConfig,
) -> Result<KnappReport> {
    cfg.validate(deltas)?;
    if deltas.len() < 3 {
        return Err(Error::InsufficientData("Knapp fit needs at least three delta values".into()));
    }
    let points: Vec<KnappPoint> = deltas
        .par_iter()
        .map(|&d| rectangle_lhs(cfg, d, quad))
        .collect::<Result<_>>()?;
    let ld: Vec<f64> = points.iter().map(|q| q.delta.ln()).collect();
    let ll: Vec<f64> = points.iter().map(|q| q.lhs.ln()).collect();
    let ln: Vec<f64> = points.iter().map(|q| q.norm.ln()).collect();
    let fitted_lhs_exponent = linear_fit(&ld, &ll).0;
    let fitted_norm_exponent = linear_fit(&ld, &ln).0;
    let n = cfg.op.n() as f64;
    let m = cfg.op.m() as f64;
    let k = 2.0 + complementary_sum(&cfg.op, cfg.pivot) as f64;
    let predicted_lhs_exponent = n + 1.0 - 2.0 * k / m;
    let predicted_norm_exponent = -k / m;
    let lower_bounds_hold = points.iter().all(|q| q.lower_bound_margin >= 1.0 && q.cosine_margin >= 1.0);

    let critical_p = knapp_critical_p(cfg.op.n(), complementary_sum(&cfg.op, cfg.pivot), cfg.op.m());
    let (constraint_at_critical, sign_change) = match critical_p {
        PBound::Finite(pc) => {
            let eps = Ratio::new(1, 1000);
            let at = constraint_exponent(&cfg.op, cfg.pivot, pc);
            let below = constraint_exponent(&cfg.op, cfg.pivot, pc - eps);
            let above = constraint_exponent(&cfg.op, cfg.pivot, pc + eps);
            (Some(PBound::Finite(at)), at.is_zero() && below.is_positive() && above.is_negative())
        }
        PBound::Unbounded => (None, false),
    };
    let p = p.map(PBound::Finite).unwrap_or(critical_p);
    let pass = (fitted_lhs_exponent - predicted_lhs_exponent).abs() <= LHS_TOL
        && (fitted_norm_exponent - predicted_norm_exponent).abs() <= NORM_TOL
        && lower_bounds_hold
        && sign_change;
    Ok(KnappReport {
        config: cfg.clone(),
        p,
        points,
        fitted_lhs_exponent,
        predicted_lhs_exponent,
        fitted_norm_exponent,
        predicted_norm_exponent,
        lower_bounds_hold,
        critical_p,
        constraint_at_critical,
        sign_change,
        pass,
    })
}
