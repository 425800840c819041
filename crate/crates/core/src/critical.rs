//! Critical points of `phi_xi` on a graph chart.
//!
//! Away from `y_j = 0` the chart gradient vanishes exactly when
//! `beta_j xi_j y_j^(beta_j - 2) = beta_k xi_k y_k^(beta_k - 2)` for every
//! chart coordinate `j`, where `k` is the chart pivot. Each zero pattern of
//! `y'` therefore reduces to a scalar equation in `r = |y_k|`, which is
//! strictly increasing and has at most one root. The closed-form set is then
//! checked against a dense grid scan of `|grad|`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ipow, Series};
use crate::phase::{
    grad_chart_unchecked, hessian_chart_unchecked, Chart, PartitionSpec, PhaseSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    /// `y' = 0`.
    I,
    /// Every chart coordinate nonzero.
    II,
    /// Mixed zero pattern.
    III,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::I => "I",
            Kind::II => "II",
            Kind::III => "III",
        };
        f.write_str(s)
    }
}

/// Whether the pivot component of the direction is small. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CaseLabel {
    SmallXiN,
    LargeXiN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalConfig {
    pub zero_tol: f64,
    pub merge_tol: f64,
    pub residual_tol: f64,
    pub degeneracy_tol: f64,
    pub xi_small: f64,
    /// Grid minima of `|grad|` below this value must be matched.
    pub scan_threshold: f64,
    /// Points per axis of the certification grid.
    pub scan_resolution: usize,
}

impl CriticalConfig {
    pub fn for_dimension(n: usize) -> Self {
        CriticalConfig {
            zero_tol: 1e-8,
            merge_tol: 1e-6,
            residual_tol: 1e-10,
            degeneracy_tol: 1e-8,
            xi_small: 0.1,
            scan_threshold: 1e-3,
            scan_resolution: if n == 2 { 2000 } else { 200 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub chart: Chart,
    pub yprime: Vec<f64>,
    pub kind: Kind,
    pub grad_norm: f64,
    pub hessian_eigs: Vec<f64>,
    pub degenerate: bool,
    pub axis_order: Option<u32>,
    /// Chart axes along which the point extends to a critical family
    /// (only when the pivot coefficient vanishes).
    pub free_axes: Vec<usize>,
}

impl CriticalPoint {
    /// Distance to `y` ignoring free axes.
    pub fn distance(&self, y: &[f64]) -> f64 {
        self.yprime
            .iter()
            .zip(y)
            .enumerate()
            .filter(|(i, _)| !self.free_axes.contains(i))
            .map(|(_, (a, b))| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub chart: Chart,
    pub direction: Vec<f64>,
    pub points: Vec<CriticalPoint>,
    pub complete: bool,
}

impl CriticalSet {
    pub fn matches(&self, y: &[f64], tol: f64) -> bool {
        self.points.iter().any(|p| p.distance(y) <= tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: Kind,
    pub nondegenerate: bool,
    pub case: CaseLabel,
}

/// `H = prefactor * (Lambda + Y^T Y)` at a kind-II point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianDecomposition {
    pub prefactor: f64,
    pub lambda: Vec<f64>,
    pub y: Vec<f64>,
}

impl HessianDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = self.y.len();
        DMatrix::from_fn(d, d, |a, b| {
            let diag = if a == b { self.lambda[a] } else { 0.0 };
            self.prefactor * (diag + self.y[a] * self.y[b])
        })
    }

    /// `Lambda + Y^T Y` without the prefactor.
    pub fn core(&self) -> DMatrix<f64> {
        let d = self.y.len();
        DMatrix::from_fn(d, d, |a, b| {
            let diag = if a == b { self.lambda[a] } else { 0.0 };
            diag + self.y[a] * self.y[b]
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPrediction {
    pub exponent: f64,
    /// `exponent <= -1/beta_max`.
    pub within_theorem_rate: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Critical points of `phi_xi` (`xi = lambda/|lambda|`) in the chart domain.
pub fn find_critical_points(
    spec: &PhaseSpec,
    chart: &Chart,
    config: &CriticalConfig,
) -> Result<CriticalSet> {
    if chart.n != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), got: chart.n });
    }
    let unit = spec.unit()?;
    let candidates = if unit.lambda()[chart.k] == 0.0 {
        vec![family_candidate(&unit, chart)]
    } else {
        enumerate_candidates(&unit, chart)?
    };

    let mut points: Vec<CriticalPoint> = Vec::new();
    for (y, free_axes) in candidates {
        let y = polish_if_needed(&unit, chart, y, config)?;
        let pt = build_point(&unit, chart, y, free_axes, config);
        if !points.iter().any(|p| p.distance(&pt.yprime) <= config.merge_tol) {
            points.push(pt);
        }
    }
    points.sort_by(|a, b| {
        a.yprime
            .iter()
            .zip(&b.yprime)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut set = CriticalSet {
        chart: *chart,
        direction: unit.lambda().to_vec(),
        points,
        complete: false,
    };
    set.complete = certify(&unit, &set, config);
    Ok(set)
}

/// Sets for all `2n` charts of the standard partition.
pub fn critical_sets(
    spec: &PhaseSpec,
    part: &PartitionSpec,
    config: &CriticalConfig,
) -> Result<Vec<CriticalSet>> {
    Chart::all(part).iter().map(|c| find_critical_points(spec, c, config)).collect()
}

/// With `xi_k = 0` the pivot term drops out: coordinates with `xi_j != 0`
/// must vanish and the rest are free.
fn family_candidate(unit: &PhaseSpec, chart: &Chart) -> (Vec<f64>, Vec<usize>) {
    let free = (0..chart.n - 1).filter(|&i| unit.lambda()[chart.full_index(i)] == 0.0).collect();
    (vec![0.0; chart.n - 1], free)
}

fn enumerate_candidates(unit: &PhaseSpec, chart: &Chart) -> Result<Vec<(Vec<f64>, Vec<usize>)>> {
    let d = chart.n - 1;
    let k = chart.k;
    let bk = unit.beta()[k] as i32;
    let xk = unit.lambda()[k];
    let s_pow = ipow(chart.sign.value(), bk - 2);
    let active: Vec<usize> = (0..d).filter(|&i| unit.lambda()[chart.full_index(i)] != 0.0).collect();

    let mut out = Vec::new();
    for mask in 0u32..(1u32 << active.len()) {
        let zset: Vec<usize> =
            active.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &i)| i).collect();
        if zset.is_empty() {
            out.push((vec![0.0; d], Vec::new()));
            continue;
        }
        // y_j^e_j = A_j * s^(beta_k-2) * r^(beta_k-2)
        let mut terms = Vec::with_capacity(zset.len());
        let mut sign_choices: Vec<Vec<f64>> = Vec::with_capacity(zset.len());
        let mut feasible = true;
        for &i in &zset {
            let j = chart.full_index(i);
            let bj = unit.beta()[j] as i32;
            let a = bk as f64 * xk / (bj as f64 * unit.lambda()[j]);
            let e = bj - 2;
            let sigma = (a * s_pow).signum();
            if e % 2 == 0 {
                if sigma < 0.0 {
                    feasible = false;
                    break;
                }
                sign_choices.push(vec![1.0, -1.0]);
            } else {
                sign_choices.push(vec![sigma]);
            }
            terms.push((a.abs(), e));
        }
        if !feasible {
            continue;
        }
        let pattern: Vec<bool> = (0..d).map(|i| zset.contains(&i)).collect();
        let r = solve_closure(&terms, bk - 2, &pattern)?;
        if r * r < 1.0 - chart.domain_radius_sq * (1.0 + 1e-12) {
            continue;
        }
        let magnitudes: Vec<f64> = terms
            .iter()
            .map(|&(a, e)| (a * ipow(r, bk - 2)).powf(1.0 / e as f64))
            .collect();
        for signs in cartesian(&sign_choices) {
            let mut y = vec![0.0; d];
            for ((&i, m), s) in zset.iter().zip(&magnitudes).zip(&signs) {
                y[i] = s * m;
            }
            out.push((y, Vec::new()));
        }
    }
    Ok(out)
}

fn cartesian(choices: &[Vec<f64>]) -> Vec<Vec<f64>> {
    choices.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut v = prefix.clone();
                    v.push(*o);
                    v
                })
            })
            .collect()
    })
}

/// Root in `(0, 1)` of `F(r) = sum_j (a_j r^q)^(2/e_j) + r^2 - 1`.
fn solve_closure(terms: &[(f64, i32)], q: i32, pattern: &[bool]) -> Result<f64> {
    let eval = |r: f64| -> (f64, f64) {
        let mut f = r * r - 1.0;
        let mut df = 2.0 * r;
        for &(a, e) in terms {
            let p = 2.0 * q as f64 / e as f64;
            let c = a.powf(2.0 / e as f64);
            f += c * r.powf(p);
            df += c * p * r.powf(p - 1.0);
        }
        (f, df)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut r = 0.5;
    for _ in 0..200 {
        let (f, df) = eval(r);
        if f == 0.0 {
            return Ok(r);
        }
        if f < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let newton = r - f / df;
        let next = if df > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - r).abs() <= 1e-16 * r.max(1e-300) || hi - lo <= 1e-16 {
            return Ok(next);
        }
        r = next;
    }
    let (f, _) = eval(r);
    if f.abs() < 1e-13 {
        Ok(r)
    } else {
        Err(Error::RootFinding {
            pattern: pattern.to_vec(),
            reason: format!("closure residual {f:.3e} after 200 iterations"),
        })
    }
}

fn polish_if_needed(
    unit: &PhaseSpec,
    chart: &Chart,
    y: Vec<f64>,
    config: &CriticalConfig,
) -> Result<Vec<f64>> {
    if norm(&grad_chart_unchecked(unit, chart, &y)) <= config.residual_tol {
        return Ok(y);
    }
    match polish(unit, chart, &y, config) {
        Some(p) => Ok(p),
        None => Err(Error::RootFinding {
            pattern: y.iter().map(|v| v.abs() >= config.zero_tol).collect(),
            reason: "Newton polishing did not reach the residual tolerance".into(),
        }),
    }
}

/// Pseudo-inverse Newton on the chart gradient. Returns the polished point
/// when its residual is at most `residual_tol` and it stays in the domain.
pub fn polish(
    spec: &PhaseSpec,
    chart: &Chart,
    start: &[f64],
    config: &CriticalConfig,
) -> Option<Vec<f64>> {
    let mut y = start.to_vec();
    for _ in 0..200 {
        if chart.check_domain(&y).is_err() {
            return None;
        }
        let g = grad_chart_unchecked(spec, chart, &y);
        if g.iter().all(|v| *v == 0.0) {
            break;
        }
        let h = hessian_chart_unchecked(spec, chart, &y);
        let svd = h.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max();
        let step = svd.solve(&nalgebra::DVector::from_vec(g), eps).ok()?;
        for (yi, si) in y.iter_mut().zip(step.iter()) {
            *yi -= si;
        }
        if step.norm() < 1e-14 {
            break;
        }
    }
    if chart.check_domain(&y).is_err() {
        return None;
    }
    (norm(&grad_chart_unchecked(spec, chart, &y)) <= config.residual_tol).then_some(y)
}

fn build_point(
    unit: &PhaseSpec,
    chart: &Chart,
    yprime: Vec<f64>,
    free_axes: Vec<usize>,
    config: &CriticalConfig,
) -> CriticalPoint {
    let grad_norm = norm(&grad_chart_unchecked(unit, chart, &yprime));
    let h = hessian_chart_unchecked(unit, chart, &yprime);
    let mut hessian_eigs: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    hessian_eigs.sort_by(f64::total_cmp);
    let degenerate = hessian_eigs.iter().any(|e| e.abs() < config.degeneracy_tol);
    let axis_order = if degenerate { axis_order(unit, chart, &yprime) } else { None };
    CriticalPoint {
        chart: *chart,
        kind: kind_of(&yprime, config.zero_tol),
        yprime,
        grad_norm,
        hessian_eigs,
        degenerate,
        axis_order,
        free_axes,
    }
}

fn kind_of(yprime: &[f64], zero_tol: f64) -> Kind {
    let nonzero = yprime.iter().filter(|v| v.abs() >= zero_tol).count();
    if nonzero == 0 {
        Kind::I
    } else if nonzero == yprime.len() {
        Kind::II
    } else {
        Kind::III
    }
}

/// Smallest order `d >= 2` at which some coordinate-axis derivative of
/// `phi(lift(y' + t e_i))` is nonzero, searched up to `beta_max + 1`.
pub fn axis_order(spec: &PhaseSpec, chart: &Chart, yprime: &[f64]) -> Option<u32> {
    let order = spec.beta_max() as usize + 1;
    let d = yprime.len();
    let mut best: Option<u32> = None;
    for axis in 0..d {
        let coords: Vec<Series> = (0..d)
            .map(|i| {
                if i == axis {
                    Series::variable(yprime[i], order)
                } else {
                    Series::constant(yprime[i], order)
                }
            })
            .collect();
        let mut rest = Series::constant(1.0, order);
        for c in &coords {
            rest = rest.add(&c.mul(c).scale(-1.0));
        }
        if rest.coeffs[0] <= 0.0 {
            continue;
        }
        let pivot = rest.sqrt().scale(chart.sign.value());
        let mut phase = Series::constant(0.0, order);
        for j in 0..chart.n {
            let lj = spec.lambda()[j];
            if lj == 0.0 {
                continue;
            }
            let yj = if j == chart.k {
                &pivot
            } else {
                &coords[if j < chart.k { j } else { j - 1 }]
            };
            phase = phase.add(&yj.powi(spec.beta()[j]).scale(lj));
        }
        let scale = spec.lambda().iter().map(|l| l.abs()).fold(0.0, f64::max);
        if let Some(dd) = (2..=order).find(|&dd| phase.derivative(dd).abs() > 1e-8 * scale) {
            best = Some(best.map_or(dd as u32, |b| b.min(dd as u32)));
        }
    }
    best
}

pub fn classify(spec: &PhaseSpec, pt: &CriticalPoint, config: &CriticalConfig) -> Classification {
    let xi_k = spec.direction().map_or(0.0, |xi| xi[pt.chart.k]);
    Classification {
        kind: pt.kind,
        nondegenerate: !pt.degenerate,
        case: if xi_k.abs() < config.xi_small { CaseLabel::SmallXiN } else { CaseLabel::LargeXiN },
    }
}

/// Splits the Hessian of `phi_xi` at a kind-II point.
pub fn hessian_decomposition(spec: &PhaseSpec, pt: &CriticalPoint) -> Result<HessianDecomposition> {
    if pt.kind != Kind::II {
        return Err(Error::NotKindII);
    }
    let unit = spec.unit()?;
    let chart = &pt.chart;
    let k = chart.k;
    let bk = unit.beta()[k] as i32;
    let yk = chart.pivot(&pt.yprime);
    let prefactor = unit.lambda()[k] * bk as f64 * (bk - 2) as f64 * ipow(yk, bk - 2);
    let lambda = (0..pt.yprime.len())
        .map(|i| (unit.beta()[chart.full_index(i)] as f64 - 2.0) / (bk as f64 - 2.0))
        .collect();
    let y = pt.yprime.iter().map(|v| v / yk).collect();
    Ok(HessianDecomposition { prefactor, lambda, y })
}

/// Predicted decay exponent of `I(t xi)` from the critical sets of all charts.
pub fn decay_bound(sets: &[CriticalSet], spec: &PhaseSpec) -> Result<DecayPrediction> {
    if let Some(s) = sets.iter().find(|s| !s.complete) {
        return Err(Error::IncompleteSet { chart: s.chart.to_string() });
    }
    let n = spec.n() as f64;
    let mut exponent = -(n - 1.0) / 2.0;
    for pt in sets.iter().flat_map(|s| &s.points).filter(|p| p.degenerate) {
        let order = pt.axis_order.ok_or_else(|| Error::UndeterminedOrder { point: pt.yprime.clone() })?;
        exponent = exponent.max(-1.0 / order as f64);
    }
    Ok(DecayPrediction {
        exponent,
        within_theorem_rate: exponent <= -1.0 / spec.beta_max() as f64 + 1e-12,
    })
}

/// Grid points whose `|grad|` is a local minimum below `threshold`.
pub fn grid_minima(spec: &PhaseSpec, chart: &Chart, resolution: usize, threshold: f64) -> Vec<Vec<f64>> {
    let rho = chart.domain_radius();
    let h = 2.0 * rho / (resolution - 1) as f64;
    let coord = |i: usize| -rho + h * i as f64;
    let gnorm = |y: &[f64]| norm(&grad_chart_unchecked(spec, chart, y));
    match chart.n {
        2 => {
            let g: Vec<f64> = (0..resolution).map(|i| gnorm(&[coord(i)])).collect();
            (0..resolution)
                .filter(|&i| {
                    g[i] < threshold
                        && (i == 0 || g[i] <= g[i - 1])
                        && (i + 1 == resolution || g[i] <= g[i + 1])
                })
                .map(|i| vec![coord(i)])
                .collect()
        }
        3 => {
            let inside = |i: usize, j: usize| coord(i).powi(2) + coord(j).powi(2) <= chart.domain_radius_sq;
            let mut g = vec![f64::INFINITY; resolution * resolution];
            for i in 0..resolution {
                for j in 0..resolution {
                    if inside(i, j) {
                        g[i * resolution + j] = gnorm(&[coord(i), coord(j)]);
                    }
                }
            }
            let mut out = Vec::new();
            for i in 0..resolution {
                for j in 0..resolution {
                    let v = g[i * resolution + j];
                    if !(v < threshold) {
                        continue;
                    }
                    let is_min = (-1i64..=1).all(|di| {
                        (-1i64..=1).all(|dj| {
                            let (a, b) = (i as i64 + di, j as i64 + dj);
                            if (di == 0 && dj == 0)
                                || a < 0
                                || b < 0
                                || a >= resolution as i64
                                || b >= resolution as i64
                            {
                                return true;
                            }
                            v <= g[a as usize * resolution + b as usize]
                        })
                    });
                    if is_min {
                        out.push(vec![coord(i), coord(j)]);
                    }
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

/// Every converged polish of a grid minimum must land on a returned point.
fn certify(unit: &PhaseSpec, set: &CriticalSet, config: &CriticalConfig) -> bool {
    if !(2..=3).contains(&set.chart.n) {
        return false;
    }
    grid_minima(unit, &set.chart, config.scan_resolution, config.scan_threshold)
        .iter()
        .filter_map(|y| polish(unit, &set.chart, y, config))
        .all(|p| set.matches(&p, config.merge_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::Sign;
    use proptest::prelude::*;

    fn spec(beta: &[u32], lambda: &[f64]) -> PhaseSpec {
        PhaseSpec::new(beta.to_vec(), lambda.to_vec()).unwrap()
    }

    fn chart(n: usize, k: usize, sign: Sign) -> Chart {
        Chart::new(n, k, sign, &PartitionSpec::standard(n)).unwrap()
    }

    fn cfg(n: usize) -> CriticalConfig {
        CriticalConfig::for_dimension(n)
    }

    #[test]
    fn north_pole_direction_on_pivot_chart() {
        let s = spec(&[3, 3], &[0.0, 1.0]);
        let set = find_critical_points(&s, &chart(2, 1, Sign::Plus), &cfg(2)).unwrap();
        assert!(set.complete);
        assert_eq!(set.points.len(), 1);
        let p = &set.points[0];
        assert_eq!(p.yprime, vec![0.0]);
        assert_eq!(p.kind, Kind::I);
        assert!(!p.degenerate);
        assert!((p.hessian_eigs[0] + 3.0).abs() < 1e-15);
        let c = classify(&s, p, &cfg(2));
        assert_eq!(c.case, CaseLabel::LargeXiN);
        assert!(c.nondegenerate);
    }

    #[test]
    fn equatorial_point_is_degenerate_of_order_three() {
        // d/dtheta sin^3(theta) = 3 sin^2 cos vanishes doubly at theta = 0
        let s = spec(&[3, 3], &[0.0, 1.0]);
        for sign in [Sign::Plus, Sign::Minus] {
            let set = find_critical_points(&s, &chart(2, 0, sign), &cfg(2)).unwrap();
            assert!(set.complete);
            assert_eq!(set.points.len(), 1);
            let p = &set.points[0];
            assert_eq!(p.kind, Kind::I);
            assert!(p.degenerate);
            assert_eq!(p.axis_order, Some(3));
        }
    }

    #[test]
    fn diagonal_direction_points_match_analytic_factorisation() {
        // 3 sin cos (xi_2 sin - xi_1 cos) = 0 on the circle
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = spec(&[3, 3], &[r, r]);
        let set = find_critical_points(&s, &chart(2, 1, Sign::Plus), &cfg(2)).unwrap();
        assert!(set.complete);
        assert_eq!(set.points.len(), 2);
        assert_eq!(set.points[0].kind, Kind::I);
        assert_eq!(set.points[1].kind, Kind::II);
        assert!((set.points[1].yprime[0] - r).abs() < 1e-15);
        assert!(set.points.iter().all(|p| !p.degenerate && p.grad_norm <= 1e-10));
        let dec = hessian_decomposition(&s, &set.points[1]).unwrap();
        let h = hessian_chart_unchecked(&s.unit().unwrap(), &set.points[1].chart, &set.points[1].yprime);
        assert!((dec.reconstruct() - &h).abs().max() <= 1e-10 * h.abs().max());
        assert_eq!(hessian_decomposition(&s, &set.points[0]), Err(Error::NotKindII));
    }

    #[test]
    fn decomposition_lambda_entries() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = spec(&[3, 4], &[r, r]);
        let set = find_critical_points(&s, &chart(2, 1, Sign::Plus), &cfg(2)).unwrap();
        let p = set.points.iter().find(|p| p.kind == Kind::II).unwrap();
        assert_eq!(hessian_decomposition(&s, p).unwrap().lambda, vec![0.5]);

        let q = 1.0 / 3f64.sqrt();
        let s = spec(&[3, 3, 3], &[q, q, q]);
        let set = find_critical_points(&s, &chart(3, 2, Sign::Plus), &cfg(3)).unwrap();
        let p = set.points.iter().find(|p| p.kind == Kind::II).unwrap();
        assert_eq!(hessian_decomposition(&s, p).unwrap().lambda, vec![1.0, 1.0]);
        assert!(set.points.iter().any(|p| p.kind == Kind::III));
    }

    #[test]
    fn small_pivot_direction_is_labelled() {
        let s = spec(&[3, 3], &[1.0, 0.0]);
        let set = find_critical_points(&s, &chart(2, 1, Sign::Plus), &cfg(2)).unwrap();
        let p = set.points.iter().find(|p| p.kind == Kind::I).unwrap();
        assert_eq!(classify(&s, p, &cfg(2)).case, CaseLabel::SmallXiN);
    }

    #[test]
    fn decay_bound_examples() {
        let part2 = PartitionSpec::standard(2);
        let s = spec(&[3, 3], &[0.0, 1.0]);
        let sets = critical_sets(&s, &part2, &cfg(2)).unwrap();
        assert_eq!(decay_bound(&sets, &s).unwrap().exponent, -1.0 / 3.0);

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = spec(&[3, 3], &[r, r]);
        let sets = critical_sets(&s, &part2, &cfg(2)).unwrap();
        let pred = decay_bound(&sets, &s).unwrap();
        assert_eq!(pred.exponent, -0.5);
        assert!(pred.within_theorem_rate);

        let s = spec(&[3, 3, 3], &[0.0, 0.0, 1.0]);
        let sets = critical_sets(&s, &PartitionSpec::standard(3), &cfg(3)).unwrap();
        assert_eq!(decay_bound(&sets, &s).unwrap().exponent, -1.0 / 3.0);
        let fam = sets[0].points.iter().find(|p| !p.free_axes.is_empty()).unwrap();
        assert_eq!(fam.free_axes, vec![0]);
    }

    #[test]
    fn incomplete_set_is_rejected() {
        let s = spec(&[3, 3], &[0.0, 1.0]);
        let mut sets = critical_sets(&s, &PartitionSpec::standard(2), &cfg(2)).unwrap();
        sets[0].complete = false;
        assert!(matches!(decay_bound(&sets, &s), Err(Error::IncompleteSet { .. })));
    }

    #[test]
    fn axis_pole_direction_matches_pivot_exponent() {
        for b in [3u32, 4, 5, 6] {
            let s = spec(&[3, b], &[0.0, 1.0]);
            let sets = critical_sets(&s, &PartitionSpec::standard(2), &cfg(2)).unwrap();
            assert_eq!(decay_bound(&sets, &s).unwrap().exponent, -1.0 / b as f64, "beta_2 = {b}");
        }
        let s = spec(&[3, 3, 4], &[0.0, 0.0, 1.0]);
        let sets = critical_sets(&s, &PartitionSpec::standard(3), &cfg(3)).unwrap();
        assert_eq!(decay_bound(&sets, &s).unwrap().exponent, -0.25);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn kind_two_core_is_positive_definite_for_large_pivot(
            b in proptest::collection::vec(3u32..=6, 3),
            u in proptest::collection::vec(-1.0f64..1.0, 2),
            pivot in 0.5f64..1.0,
            minus in any::<bool>(),
        ) {
            let tail = (1.0 - pivot * pivot).sqrt();
            let un = (u[0] * u[0] + u[1] * u[1]).sqrt().max(1e-9);
            let xi = [tail * u[0] / un, tail * u[1] / un, pivot];
            let s = spec(&b, &xi);
            let c = chart(3, 2, if minus { Sign::Minus } else { Sign::Plus });
            let set = find_critical_points(&s, &c, &cfg(3)).unwrap();
            for p in set.points.iter().filter(|p| p.kind == Kind::II) {
                let dec = hessian_decomposition(&s, p).unwrap();
                let eig = SymmetricEigen::new(dec.core()).eigenvalues;
                prop_assert!(eig.min() > 0.0);
                prop_assert!(!p.degenerate);
            }
            for p in &set.points {
                prop_assert!(p.grad_norm <= 1e-10);
            }
        }
    }
}
