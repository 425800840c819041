//! Quadrature for oscillatory integrals: the sphere integral `I(lambda)`,
//! its partition-of-unity chart decomposition, the slice profile of the
//! polar cap complement, and panel-adaptive 1D integrals of
//! `e^{i c y^m} f(y)`.
//!
//! Node counts are driven by bounds on the total phase variation along each
//! integration axis. Accuracy is certified by node doubling.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{composite_nodes, gauss_legendre, ipow};
use crate::phase::{Chart, PartitionSpec, PhaseSpec};

const PANEL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Nodes per `2 pi` of phase variation.
    pub nodes_per_period: usize,
    /// Minimum node count per axis.
    pub base_nodes: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_magnitude: f64,
    /// Node budget per axis before giving up on doubling.
    pub max_nodes: usize,
    /// Panel budget for 1D oscillatory integrals.
    pub max_panels: usize,
}

impl QuadratureConfig {
    pub fn for_dimension(n: usize) -> Self {
        QuadratureConfig {
            nodes_per_period: 16,
            base_nodes: 64,
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_magnitude: if n == 2 { 1e5 } else { 1e3 },
            max_nodes: 1 << 24,
            max_panels: 1 << 22,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_period < 10 {
            return Err(Error::InvalidSpec("nodes_per_period must be at least 10".into()));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidSpec("quadrature tolerances must be positive".into()));
        }
        if self.base_nodes == 0 || self.max_nodes < self.base_nodes {
            return Err(Error::InvalidSpec("inconsistent node budget".into()));
        }
        Ok(())
    }

    /// Node count resolving a phase variation of `variation` radians.
    pub fn nodes_for(&self, variation: f64) -> usize {
        let periods = variation / (2.0 * PI) + 1.0;
        ((self.nodes_per_period as f64 * periods).ceil() as usize).max(self.base_nodes)
    }

    pub(crate) fn tolerance(&self, value: Complex64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.norm())
    }

    fn check_magnitude(&self, spec: &PhaseSpec) -> Result<()> {
        let magnitude = spec.magnitude();
        // unit directions are only unit to rounding
        if magnitude > self.max_magnitude * (1.0 + 1e-12) {
            return Err(Error::MagnitudeCap { magnitude, cap: self.max_magnitude });
        }
        Ok(())
    }
}

fn check_backend(n: usize) -> Result<()> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidSpec(format!("quadrature backends cover n = 2, 3 only (got {n})")));
    }
    Ok(())
}

#[inline]
fn cis(phase: f64) -> Complex64 {
    let (s, c) = phase.sin_cos();
    Complex64::new(c, s)
}

/// Surface area of `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => sphere_area(n - 2) * 2.0 * PI / (n - 2) as f64,
    }
}

/// `I(lambda) = int_{S^{n-1}} e^{i phi_lambda(y)} d sigma(y)` by a global
/// angular rule.
pub fn sphere_integral(spec: &PhaseSpec, quad: &QuadratureConfig) -> Result<Complex64> {
    quad.validate()?;
    check_backend(spec.n())?;
    quad.check_magnitude(spec)?;
    let abs_sum: f64 = spec.lambda().iter().map(|l| l.abs()).sum();
    if spec.n() == 2 {
        circle_integral(quad, 4.0 * abs_sum, |theta| {
            let (s, c) = theta.sin_cos();
            spec.eval_unchecked(&[c, s])
        })
    } else {
        sphere3_integral(spec, quad)
    }
}

/// Periodic trapezoid on `[0, 2 pi)` of `e^{i phase(theta)}`; the coarse
/// level's nodes are reused when doubling.
fn circle_integral(
    quad: &QuadratureConfig,
    variation: f64,
    phase: impl Fn(f64) -> f64,
) -> Result<Complex64> {
    let mut n = quad.nodes_for(variation);
    let mut sum: Complex64 = (0..n).map(|i| cis(phase(2.0 * PI * i as f64 / n as f64))).sum();
    loop {
        let coarse = sum * (2.0 * PI / n as f64);
        let odd: Complex64 = (0..n)
            .map(|i| cis(phase(2.0 * PI * (i as f64 + 0.5) / n as f64)))
            .sum();
        sum += odd;
        n *= 2;
        let fine = sum * (2.0 * PI / n as f64);
        let err = (fine - coarse).norm();
        if err <= quad.tolerance(fine) {
            return Ok(fine);
        }
        if 2 * n > quad.max_nodes {
            return Err(Error::NotConverged { estimate: err, nodes: n });
        }
    }
}

/// Gauss-Legendre in the polar angle times trapezoid in azimuth.
fn sphere3_integral(spec: &PhaseSpec, quad: &QuadratureConfig) -> Result<Complex64> {
    let l = spec.lambda();
    let b = spec.beta();
    let meridian = 2.0 * (l[0].abs() + l[1].abs() + l[2].abs());
    let azimuth = 4.0 * (l[0].abs() + l[1].abs());
    let mut panels = quad.nodes_for(meridian).div_ceil(PANEL_ORDER);
    let mut n_phi = quad.nodes_for(azimuth);
    let rule = gauss_legendre(PANEL_ORDER);

    let eval = |panels: usize, n_phi: usize| -> Complex64 {
        let az: Vec<(f64, f64)> = (0..n_phi)
            .map(|j| {
                let (s, c) = (2.0 * PI * j as f64 / n_phi as f64).sin_cos();
                (ipow(c, b[0] as i32), ipow(s, b[1] as i32))
            })
            .collect();
        let w_phi = 2.0 * PI / n_phi as f64;
        composite_nodes(&rule, 0.0, PI, panels)
            .into_iter()
            .map(|(theta, w)| {
                let (st, ct) = theta.sin_cos();
                let a1 = l[0] * ipow(st, b[0] as i32);
                let a2 = l[1] * ipow(st, b[1] as i32);
                let a3 = l[2] * ipow(ct, b[2] as i32);
                let inner: Complex64 = if a1 == 0.0 && a2 == 0.0 {
                    Complex64::new(n_phi as f64, 0.0)
                } else {
                    az.iter().map(|(cp, sp)| cis(a1 * cp + a2 * sp)).sum()
                };
                inner * cis(a3) * (w * st * w_phi)
            })
            .sum()
    };

    let mut coarse = eval(panels, n_phi);
    loop {
        panels *= 2;
        n_phi *= 2;
        let fine = eval(panels, n_phi);
        let err = (fine - coarse).norm();
        if err <= quad.tolerance(fine) {
            return Ok(fine);
        }
        if 2 * panels * PANEL_ORDER > quad.max_nodes || 2 * n_phi > quad.max_nodes {
            return Err(Error::NotConverged { estimate: err, nodes: panels * PANEL_ORDER * n_phi });
        }
        coarse = fine;
    }
}

/// Phase variation of the non-pivot monomials around the ring `|y'| = r`:
/// `|cos|^beta` has total variation 4 per turn.
fn ring_variation(spec: &PhaseSpec, chart: &Chart, r: f64) -> f64 {
    (0..spec.n())
        .filter(|&j| j != chart.k)
        .map(|j| 4.0 * spec.lambda()[j].abs() * ipow(r, spec.beta()[j] as i32))
        .sum()
}

/// `int e^{i phi} psi_k d sigma` over one chart, using `d sigma = dy'/|y_k|`.
pub fn chart_integral(
    spec: &PhaseSpec,
    chart: &Chart,
    part: &PartitionSpec,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    quad.validate()?;
    check_backend(spec.n())?;
    quad.check_magnitude(spec)?;
    if chart.n != spec.n() || part.n != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), got: chart.n });
    }
    // every monomial, the pivot included, is monotone along a ray from the
    // chart centre, so it varies by at most |lambda_j| per ray
    let abs_sum: f64 = spec.lambda().iter().map(|l| l.abs()).sum();
    let rho = chart.domain_radius();
    let rule = gauss_legendre(PANEL_ORDER);
    // the ramp needs a few panels of its own whatever the phase
    let min_panels = 16;

    let integrand = |yp: &[f64]| -> Complex64 {
        let y = chart.lift_unchecked(yp);
        let w = part.weight_unchecked(chart.k, &y);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        cis(spec.eval_unchecked(&y)) * (w / y[chart.k].abs())
    };

    let mut panels = quad.nodes_for(2.0 * abs_sum).div_ceil(PANEL_ORDER).max(min_panels);
    if spec.n() == 2 {
        let eval = |panels: usize| -> Complex64 {
            composite_nodes(&rule, -rho, rho, panels)
                .into_iter()
                .map(|(x, w)| integrand(&[x]) * w)
                .sum()
        };
        let mut coarse = eval(panels);
        loop {
            panels *= 2;
            let fine = eval(panels);
            let err = (fine - coarse).norm();
            if err <= quad.tolerance(fine) {
                return Ok(fine);
            }
            if 2 * panels * PANEL_ORDER > quad.max_nodes {
                return Err(Error::NotConverged { estimate: err, nodes: panels * PANEL_ORDER });
            }
            coarse = fine;
        }
    }

    // polar coordinates on the disc; the angular count grows with radius
    let mut panels = quad.nodes_for(abs_sum).div_ceil(PANEL_ORDER).max(min_panels);
    let mut angular_scale = 1usize;
    let eval = |panels: usize, scale: usize| -> Complex64 {
        composite_nodes(&rule, 0.0, rho, panels)
            .into_iter()
            .map(|(r, w)| {
                let n_om = quad.nodes_for(ring_variation(spec, chart, r)) * scale;
                let w_om = 2.0 * PI / n_om as f64;
                let ring: Complex64 = (0..n_om)
                    .map(|j| {
                        let (s, c) = (2.0 * PI * j as f64 / n_om as f64).sin_cos();
                        integrand(&[r * c, r * s])
                    })
                    .sum();
                ring * (w * r * w_om)
            })
            .sum()
    };
    let mut coarse = eval(panels, angular_scale);
    loop {
        panels *= 2;
        angular_scale *= 2;
        let fine = eval(panels, angular_scale);
        let err = (fine - coarse).norm();
        if err <= quad.tolerance(fine) {
            return Ok(fine);
        }
        if 2 * panels * PANEL_ORDER > quad.max_nodes || angular_scale > 64 {
            return Err(Error::NotConverged { estimate: err, nodes: panels * PANEL_ORDER });
        }
        coarse = fine;
    }
}

/// `I(lambda)` as the sum of all `2n` chart integrals.
pub fn sphere_integral_charted(
    spec: &PhaseSpec,
    part: &PartitionSpec,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    Chart::all(part)
        .iter()
        .map(|c| chart_integral(spec, c, part, quad))
        .sum()
}

/// `Psi_n(u)`: the measure density at height `y_n = u` of the complement of
/// the polar weight, `(1-u^2)^{(n-3)/2} int_{S^{n-2}} (1 - psi_n) d omega`.
pub fn slice_value(part: &PartitionSpec, u: f64) -> Result<f64> {
    let n = part.n;
    check_backend(n)?;
    if !(u > -1.0 && u < 1.0) {
        return Err(Error::InvalidSpec(format!("slice height {u} outside (-1, 1)")));
    }
    let s2 = 1.0 - u * u;
    if s2 <= part.t_lo * part.t_lo {
        return Ok(0.0);
    }
    let s = s2.sqrt();
    if n == 2 {
        let w = part.weight_unchecked(1, &[s, u]);
        return Ok(2.0 * (1.0 - w) / s);
    }
    // the ring integrand is smooth and periodic; double until it settles
    let ring = |m: usize| -> f64 {
        (0..m)
            .map(|j| {
                let (a, b) = (2.0 * PI * j as f64 / m as f64).sin_cos();
                1.0 - part.weight_unchecked(2, &[s * b, s * a, u])
            })
            .sum::<f64>()
            * (2.0 * PI / m as f64)
    };
    let mut m = 128;
    let mut coarse = ring(m);
    loop {
        m *= 2;
        let fine = ring(m);
        if (fine - coarse).abs() <= 1e-13 || m >= 1 << 16 {
            return Ok(fine);
        }
        coarse = fine;
    }
}

/// Tabulated `Psi_n` with cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceProfile {
    pub n: usize,
    pub grid: Vec<f64>,
    pub samples: Vec<f64>,
    slopes: Vec<f64>,
    pub support_radius: f64,
}

impl SliceProfile {
    pub fn eval(&self, u: f64) -> f64 {
        if u.abs() >= self.support_radius {
            return 0.0;
        }
        let g = &self.grid;
        if g.len() == 1 || u <= g[0] {
            return self.samples[0];
        }
        if u >= g[g.len() - 1] {
            return self.samples[g.len() - 1];
        }
        let i = g.partition_point(|&x| x <= u) - 1;
        let h = g[i + 1] - g[i];
        let t = (u - g[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * self.samples[i] + h01 * self.samples[i + 1]
            + h * (h10 * self.slopes[i] + h11 * self.slopes[i + 1]))
            .max(0.0)
    }
}

pub fn slice_profile(part: &PartitionSpec, grid: &[f64]) -> Result<SliceProfile> {
    if grid.is_empty() {
        return Err(Error::InsufficientData("empty slice grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec("slice grid must be strictly increasing".into()));
    }
    let samples = grid.iter().map(|&u| slice_value(part, u)).collect::<Result<Vec<_>>>()?;
    let h = 1e-6;
    let slopes = grid
        .iter()
        .map(|&u| {
            let (a, b) = ((u - h).max(-1.0 + 1e-15), (u + h).min(1.0 - 1e-15));
            Ok((slice_value(part, b)? - slice_value(part, a)?) / (b - a))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SliceProfile {
        n: part.n,
        grid: grid.to_vec(),
        samples,
        slopes,
        support_radius: (1.0 - part.t_lo * part.t_lo).sqrt(),
    })
}

/// One-dimensional test profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile1D {
    /// `exp(-((y - center)/sigma)^2)`.
    Gaussian { sigma: f64, center: f64 },
    Indicator { lo: f64, hi: f64 },
    /// `e^{-i y^m}` on `[lo, hi]`.
    ModulatedIndicator { lo: f64, hi: f64, m: u32 },
}

/// Gaussians are cut where they fall below `e^{-36}`.
const GAUSSIAN_CUTOFF: f64 = 6.0;

impl Profile1D {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile1D::Gaussian { sigma, center } => {
                if !(sigma > 0.0 && sigma.is_finite() && center.is_finite()) {
                    return Err(Error::InvalidSpec(format!("gaussian width {sigma} must be positive")));
                }
            }
            Profile1D::Indicator { lo, hi } | Profile1D::ModulatedIndicator { lo, hi, .. } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidSpec(format!("indicator needs lo < hi, got [{lo}, {hi}]")));
                }
            }
        }
        Ok(())
    }

    /// Interval outside which the profile is treated as zero.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Profile1D::Gaussian { sigma, center } => {
                (center - GAUSSIAN_CUTOFF * sigma, center + GAUSSIAN_CUTOFF * sigma)
            }
            Profile1D::Indicator { lo, hi } | Profile1D::ModulatedIndicator { lo, hi, .. } => (lo, hi),
        }
    }

    /// Real amplitude `|f(y)|` on the support.
    #[inline]
    pub fn amplitude(&self, y: f64) -> f64 {
        match *self {
            Profile1D::Gaussian { sigma, center } => {
                let z = (y - center) / sigma;
                (-z * z).exp()
            }
            _ => 1.0,
        }
    }

    pub fn is_real(&self) -> bool {
        !matches!(self, Profile1D::ModulatedIndicator { .. })
    }

    /// `int |f|^p dy` in closed form.
    pub fn abs_power_integral(&self, p: f64) -> f64 {
        match *self {
            Profile1D::Gaussian { sigma, .. } => sigma * (PI / p).sqrt(),
            Profile1D::Indicator { lo, hi } | Profile1D::ModulatedIndicator { lo, hi, .. } => hi - lo,
        }
    }

    /// Monomial phase terms `(coefficient, exponent)` of `e^{i c y^m} f(y)`.
    fn phase_terms(&self, c: f64, m: u32) -> Vec<(f64, u32)> {
        let mut terms = vec![(c, m)];
        if let Profile1D::ModulatedIndicator { m: mm, .. } = *self {
            if mm == m {
                terms[0].0 -= 1.0;
            } else {
                terms.push((-1.0, mm));
            }
        }
        terms.retain(|t| t.0 != 0.0);
        terms
    }
}

fn phase_value(terms: &[(f64, u32)], y: f64) -> f64 {
    terms.iter().map(|&(a, e)| a * ipow(y, e as i32)).sum()
}

/// Bound on `|d/dy phase|` over `[u, v]`.
fn phase_derivative_bound(terms: &[(f64, u32)], u: f64, v: f64) -> f64 {
    let m = u.abs().max(v.abs());
    terms
        .iter()
        .map(|&(a, e)| a.abs() * e as f64 * if e >= 1 { ipow(m, e as i32 - 1) } else { 0.0 })
        .sum()
}

/// Panels of `[a, b]` with phase change at most `pi/2` and width at most `max_width`.
fn oscillation_panels(
    terms: &[(f64, u32)],
    a: f64,
    b: f64,
    max_width: f64,
    budget: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut panels = Vec::new();
    let mut lo = a;
    while lo < b {
        let mut w = (b - lo).min(max_width);
        loop {
            let d = phase_derivative_bound(terms, lo, lo + w);
            if d * w <= 0.5 * PI {
                break;
            }
            w = (0.999 * 0.5 * PI / d).min(0.5 * w);
        }
        let hi = if b - (lo + w) <= 1e-12 * (b - a) { b } else { lo + w };
        panels.push((lo, hi));
        if panels.len() > budget {
            return Err(Error::BudgetExceeded(format!(
                "more than {budget} panels needed on [{a}, {b}]"
            )));
        }
        lo = hi;
    }
    Ok(panels)
}

/// GL12 on each panel checked against GL8; failing panels are bisected.
fn adaptive_panels(
    panels: &[(f64, f64)],
    f: &impl Fn(f64) -> Complex64,
    tol_density: f64,
) -> Result<Complex64> {
    let g12 = gauss_legendre(12);
    let g8 = gauss_legendre(8);
    let rule = |lo: f64, hi: f64, r: &[(f64, f64)]| -> Complex64 {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        r.iter().map(|&(x, w)| f(mid + half * x) * (w * half)).sum()
    };
    let mut total = Complex64::new(0.0, 0.0);
    let mut stack: Vec<(f64, f64, u32)> = Vec::new();
    for &(lo, hi) in panels.iter().rev() {
        stack.push((lo, hi, 0));
    }
    while let Some((lo, hi, depth)) = stack.pop() {
        let fine = rule(lo, hi, &g12);
        let coarse = rule(lo, hi, &g8);
        if (fine - coarse).norm() <= tol_density * (hi - lo) {
            total += fine;
        } else if depth >= 40 {
            return Err(Error::NotConverged { estimate: (fine - coarse).norm(), nodes: 20 });
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(total)
}

/// Oscillatory integral over `[a, b]` of `e^{i phase(y)} amp(y)` with
/// monomial phase terms.
pub(crate) fn oscillatory_interval(
    terms: &[(f64, u32)],
    a: f64,
    b: f64,
    max_width: f64,
    amp: impl Fn(f64) -> Complex64,
    scale: f64,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    let panels = oscillation_panels(terms, a, b, max_width, quad.max_panels)?;
    let tol = quad.abs_tol.max(quad.rel_tol * scale) / (b - a);
    let f = |y: f64| cis(phase_value(terms, y)) * amp(y);
    adaptive_panels(&panels, &f, tol)
}

/// Panel-adaptive integral of `f` over `[a, b]` when the phase of `f`
/// changes at rate at most `rate`.
pub(crate) fn smooth_oscillatory(
    a: f64,
    b: f64,
    rate: f64,
    min_panels: usize,
    f: impl Fn(f64) -> Complex64,
    scale: f64,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    let count = ((rate * (b - a) / (0.5 * PI)).ceil() as usize).max(min_panels).max(1);
    if count > quad.max_panels {
        return Err(Error::BudgetExceeded(format!("{count} panels needed on [{a}, {b}]")));
    }
    let h = (b - a) / count as f64;
    let panels: Vec<(f64, f64)> = (0..count)
        .map(|i| (a + h * i as f64, if i + 1 == count { b } else { a + h * (i + 1) as f64 }))
        .collect();
    let tol = quad.abs_tol.max(quad.rel_tol * scale) / (b - a);
    adaptive_panels(&panels, &f, tol)
}

/// `int e^{i c y^m} f(y) dy`.
pub fn oscillatory_1d(
    profile: &Profile1D,
    c: f64,
    m: u32,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    profile.validate()?;
    if !c.is_finite() {
        return Err(Error::InvalidSpec("non-finite phase coefficient".into()));
    }
    let (a, b) = profile.support();
    let terms = profile.phase_terms(c, m);
    let max_width = match *profile {
        Profile1D::Gaussian { sigma, .. } => 0.5 * sigma,
        _ => b - a,
    };
    let p = *profile;
    oscillatory_interval(
        &terms,
        a,
        b,
        max_width,
        |y| Complex64::new(p.amplitude(y), 0.0),
        profile.abs_power_integral(1.0),
        quad,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: usize) -> QuadratureConfig {
        QuadratureConfig::for_dimension(n)
    }

    fn spec(beta: &[u32], lambda: &[f64]) -> PhaseSpec {
        PhaseSpec::new(beta.to_vec(), lambda.to_vec()).unwrap()
    }

    /// Adaptive Simpson on a real integrand, used as an independent oracle.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth > 50 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 0)
    }

    #[test]
    fn zero_phase_gives_surface_area() {
        let i2 = sphere_integral(&spec(&[3, 3], &[0.0, 0.0]), &q(2)).unwrap();
        assert!((i2 - Complex64::new(2.0 * PI, 0.0)).norm() < 1e-12);
        let i3 = sphere_integral(&spec(&[3, 3, 3], &[0.0; 3]), &q(3)).unwrap();
        assert!((i3 - Complex64::new(4.0 * PI, 0.0)).norm() < 1e-12);
        let p2 = PartitionSpec::standard(2);
        let c2 = sphere_integral_charted(&spec(&[3, 3], &[0.0, 0.0]), &p2, &q(2)).unwrap();
        assert!((c2 - Complex64::new(2.0 * PI, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn circle_integral_matches_simpson_oracle() {
        let s = spec(&[3, 3], &[0.0, 10.0]);
        let re = simpson(&|t: f64| (10.0 * t.sin().powi(3)).cos(), 0.0, 2.0 * PI, 1e-13);
        let im = simpson(&|t: f64| (10.0 * t.sin().powi(3)).sin(), 0.0, 2.0 * PI, 1e-13);
        let got = sphere_integral(&s, &q(2)).unwrap();
        assert!((got - Complex64::new(re, im)).norm() < 1e-10, "{got} vs {re} {im}");
        let charted = sphere_integral_charted(&s, &PartitionSpec::standard(2), &q(2)).unwrap();
        assert!((charted - Complex64::new(re, im)).norm() < 1e-8);
    }

    #[test]
    fn charted_agrees_with_global_on_diagonal() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = spec(&[3, 3], &[5.0 * r * 20.0, 5.0 * r * 20.0]);
        let a = sphere_integral(&s, &q(2)).unwrap();
        let b = sphere_integral_charted(&s, &PartitionSpec::standard(2), &q(2)).unwrap();
        assert!((a - b).norm() <= 1e-6 * a.norm());
    }

    #[test]
    fn magnitude_cap_is_enforced() {
        let s = spec(&[3, 3], &[0.0, 2e5]);
        assert!(matches!(sphere_integral(&s, &q(2)), Err(Error::MagnitudeCap { .. })));
        let s = spec(&[3, 3, 3, 3], &[0.0; 4]);
        assert!(sphere_integral(&s, &q(2)).is_err());
    }

    #[test]
    fn sphere3_matches_axis_closed_form() {
        // with lambda = t e_3 the azimuth integrates out: 2 pi int_{-1}^{1} e^{i t u^3} du
        let t = 7.0;
        let s = spec(&[3, 3, 3], &[0.0, 0.0, t]);
        let re = simpson(&|u: f64| (t * u * u * u).cos(), -1.0, 1.0, 1e-14);
        let got = sphere_integral(&s, &q(3)).unwrap();
        assert!((got - Complex64::new(2.0 * PI * re, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn slice_profile_values() {
        let p2 = PartitionSpec::standard(2);
        assert!((slice_value(&p2, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(slice_value(&p2, 0.99).unwrap(), 0.0);
        let p3 = PartitionSpec::standard(3);
        assert!((slice_value(&p3, 0.0).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert_eq!(slice_value(&p3, 0.97).unwrap(), 0.0);
        assert!(slice_value(&p3, 1.0).is_err());

        let grid: Vec<f64> = (0..=200).map(|i| -0.995 + 1.99 * i as f64 / 200.0).collect();
        let prof = slice_profile(&p2, &grid).unwrap();
        for u in [-0.7, -0.31, 0.0, 0.42, 0.9] {
            let direct = slice_value(&p2, u).unwrap();
            assert!((prof.eval(u) - direct).abs() < 1e-3 * direct.max(1.0));
        }
        assert!(prof.samples.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn slice_profile_reassembles_sphere_integral() {
        // I(t e_2) = int Psi_2(u) e^{i t u^3} du + polar chart pieces
        let t = 40.0;
        let p = PartitionSpec::standard(2);
        let s = spec(&[3, 3], &[0.0, t]);
        let quad = q(2);
        let rho = (1.0 - p.t_lo * p.t_lo).sqrt();
        let slice = oscillatory_interval(
            &[(t, 3)],
            -rho,
            rho,
            0.05,
            |u| Complex64::new(slice_value(&p, u).unwrap(), 0.0),
            2.0 * PI,
            &quad,
        )
        .unwrap();
        let mut polar = Complex64::new(0.0, 0.0);
        for c in Chart::all(&p).iter().filter(|c| c.k == 1) {
            polar += chart_integral(&s, c, &p, &quad).unwrap();
        }
        let full = sphere_integral(&s, &quad).unwrap();
        assert!((slice + polar - full).norm() < 1e-6, "{} vs {}", slice + polar, full);
    }

    #[test]
    fn oscillatory_1d_examples() {
        let quad = q(2);
        let ind = Profile1D::Indicator { lo: -1.0, hi: 1.0 };
        assert!((oscillatory_1d(&ind, 0.0, 3, &quad).unwrap() - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        let g = Profile1D::Gaussian { sigma: 1.0, center: 0.0 };
        assert!((oscillatory_1d(&g, 0.0, 3, &quad).unwrap().re - PI.sqrt()).abs() < 1e-12);
        let expect = 2.0 * simpson(&|y: f64| (y * y * y).cos(), 0.0, 1.0, 1e-15);
        let got = oscillatory_1d(&ind, 1.0, 3, &quad).unwrap();
        assert!((got - Complex64::new(expect, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn modulated_indicator_cancels_its_own_phase() {
        let quad = q(2);
        let f = Profile1D::ModulatedIndicator { lo: -2.0, hi: 3.0, m: 3 };
        let got = oscillatory_1d(&f, 1.0, 3, &quad).unwrap();
        assert!((got - Complex64::new(5.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn gaussian_large_coefficient_matches_rotated_contour() {
        // for c > 0 the rays arg y = pi/6 and 5 pi/6 turn e^{i c y^3} into e^{-c s^3}
        let (c, sigma) = (0.8_f64, 4.0_f64);
        let ray = |angle: f64| -> Complex64 {
            let e = Complex64::from_polar(1.0, angle);
            let e2 = e * e;
            let decay = |s: f64| (-c * s * s * s - e2.re * s * s / (sigma * sigma)).exp();
            let psi = |s: f64| -e2.im * s * s / (sigma * sigma);
            let re = simpson(&|s: f64| decay(s) * psi(s).cos(), 0.0, 12.0, 1e-15);
            let im = simpson(&|s: f64| decay(s) * psi(s).sin(), 0.0, 12.0, 1e-15);
            e * Complex64::new(re, im)
        };
        let oracle = ray(PI / 6.0) - ray(5.0 * PI / 6.0);
        let got = oscillatory_1d(&Profile1D::Gaussian { sigma, center: 0.0 }, c, 3, &q(2)).unwrap();
        assert!((got - oracle).norm() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn budget_is_reported() {
        let mut quad = q(2);
        quad.max_panels = 100;
        let f = Profile1D::Indicator { lo: -50.0, hi: 50.0 };
        assert!(matches!(oscillatory_1d(&f, 1.0, 3, &quad), Err(Error::BudgetExceeded(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn conjugation_and_trivial_bound(l in proptest::collection::vec(-60.0f64..60.0, 2), b in 3u32..=5) {
            let s = spec(&[3, b], &l);
            let neg = spec(&[3, b], &[-l[0], -l[1]]);
            let a = sphere_integral(&s, &q(2)).unwrap();
            let c = sphere_integral(&neg, &q(2)).unwrap();
            prop_assert!((a - c.conj()).norm() <= 1e-12 * (1.0 + a.norm()) * 100.0);
            prop_assert!(a.norm() <= 2.0 * PI + 1e-12);
        }

        #[test]
        fn swapping_equal_exponents(l in proptest::collection::vec(-20.0f64..20.0, 3)) {
            let a = sphere_integral(&spec(&[3, 3, 4], &l), &q(3)).unwrap();
            let b = sphere_integral(&spec(&[3, 3, 4], &[l[1], l[0], l[2]]), &q(3)).unwrap();
            prop_assert!((a - b).norm() <= 1e-8 * (1.0 + a.norm()));
            prop_assert!(a.norm() <= 4.0 * PI + 1e-9);
        }
    }
}
