//! Geometric sweeps of `|I(t xi)|` and power-law fits of their envelopes.
//!
//! When several stationary points interfere, `|I|` oscillates beneath its
//! power-law envelope. The default estimator fits the log of a sliding-window
//! RMS (one decade wide, stride one sample) against the window's mean
//! `log t`; on an exact power law this reproduces the exponent exactly
//! because every window is a dilate of the previous one.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{critical_sets, decay_bound, find_critical_points, CriticalConfig};
use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, composite_nodes};
use crate::oscquad::{
    oscillatory_interval, slice_value, smooth_oscillatory, sphere_area, sphere_integral,
    QuadratureConfig,
};
use crate::phase::{Chart, PartitionSpec, PhaseSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySweep {
    pub beta: Vec<u32>,
    pub direction: Vec<f64>,
    pub points_per_decade: usize,
    pub t_values: Vec<f64>,
    pub values: Vec<Complex64>,
    pub magnitudes: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMethod {
    /// RMS over sliding windows of one decade, stride one sample.
    SlidingRms,
    /// Maximum over disjoint blocks of one decade.
    BlockMax,
    /// Least squares on every raw sample.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub residual: f64,
    pub window: usize,
    pub points: usize,
    pub method: EnvelopeMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadingCoefficient {
    pub k: u32,
    pub a0: f64,
    pub spread: f64,
    pub spread_tol: f64,
    pub converged: bool,
    /// `(t, t^{1/k} |I|)` over the last decade.
    pub samples: Vec<(f64, f64)>,
}

impl LeadingCoefficient {
    /// Errors when the spread criterion is not met.
    pub fn check(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged { estimate: self.spread, nodes: self.samples.len() })
        }
    }
}

/// Geometric grid `t_min * 10^{j/ppd}` up to `t_max`.
pub fn geometric_grid(t_min: f64, t_max: f64, points_per_decade: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max >= t_min && t_max.is_finite()) {
        return Err(Error::InvalidSpec(format!("need 0 < t_min <= t_max, got {t_min}, {t_max}")));
    }
    if points_per_decade < 8 {
        return Err(Error::InvalidSpec("points_per_decade must be at least 8".into()));
    }
    let steps = (points_per_decade as f64 * (t_max / t_min).log10()).round() as usize;
    Ok((0..=steps)
        .map(|j| if j == steps && steps > 0 { t_max } else { t_min * 10f64.powf(j as f64 / points_per_decade as f64) })
        .collect())
}

/// `I(t xi)` on a geometric grid of `t`.
pub fn decay_sweep(
    beta: &[u32],
    xi: &[f64],
    t_min: f64,
    t_max: f64,
    points_per_decade: usize,
    quad: &QuadratureConfig,
) -> Result<DecaySweep> {
    if t_max > quad.max_magnitude {
        return Err(Error::MagnitudeCap { magnitude: t_max, cap: quad.max_magnitude });
    }
    PhaseSpec::along(beta.to_vec(), xi, 1.0)?;
    let t_values = geometric_grid(t_min, t_max, points_per_decade)?;
    let values = t_values
        .par_iter()
        .map(|&t| sphere_integral(&PhaseSpec::along(beta.to_vec(), xi, t)?, quad))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecaySweep {
        beta: beta.to_vec(),
        direction: xi.to_vec(),
        points_per_decade,
        magnitudes: values.iter().map(|v| v.norm()).collect(),
        t_values,
        values,
    })
}

/// Ordinary least squares `y = slope * x + intercept`, with RMS residual.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, residual)
}

/// Envelope points `(log t, log envelope)` for the chosen estimator.
pub fn envelope_points(
    t: &[f64],
    magnitudes: &[f64],
    window: usize,
    method: EnvelopeMethod,
) -> Vec<(f64, f64)> {
    let logt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    match method {
        EnvelopeMethod::Raw => logt.iter().zip(magnitudes).map(|(a, m)| (*a, m.ln())).collect(),
        EnvelopeMethod::SlidingRms => (0..=t.len().saturating_sub(window))
            .filter(|_| t.len() >= window)
            .map(|s| {
                let idx = s..s + window;
                let lt = logt[idx.clone()].iter().sum::<f64>() / window as f64;
                let ms = magnitudes[idx].iter().map(|m| m * m).sum::<f64>() / window as f64;
                (lt, 0.5 * ms.ln())
            })
            .collect(),
        EnvelopeMethod::BlockMax => t
            .chunks(window)
            .zip(magnitudes.chunks(window))
            .zip(logt.chunks(window))
            .filter(|((c, _), _)| c.len() == window)
            .map(|((_, m), lt)| {
                let (i, mx) = m
                    .iter()
                    .enumerate()
                    .fold((0, f64::MIN), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
                (lt[i], mx.ln())
            })
            .collect(),
    }
}

pub fn fit_envelope(sweep: &DecaySweep) -> Result<DecayFit> {
    fit_envelope_with(sweep, EnvelopeMethod::SlidingRms)
}

pub fn fit_envelope_with(sweep: &DecaySweep, method: EnvelopeMethod) -> Result<DecayFit> {
    fit_samples(&sweep.t_values, &sweep.magnitudes, sweep.points_per_decade, method)
}

/// Envelope fit of arbitrary samples on a geometric grid.
pub fn fit_samples(
    t: &[f64],
    magnitudes: &[f64],
    window: usize,
    method: EnvelopeMethod,
) -> Result<DecayFit> {
    if t.len() != magnitudes.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), got: magnitudes.len() });
    }
    if t.len() < 2 || t[t.len() - 1] / t[0] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientData("envelope fit needs two decades of t".into()));
    }
    if magnitudes.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::InsufficientData("magnitudes must be positive and finite".into()));
    }
    let pts = envelope_points(t, magnitudes, window, method);
    if pts.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "envelope has {} points, at least 8 are required",
            pts.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (exponent, intercept, residual) = linear_fit(&x, &y);
    Ok(DecayFit { exponent, intercept, residual, window, points: x.len(), method })
}

/// Median and relative spread of `t^{1/k} |I|` over the last decade.
pub fn leading_coefficient(sweep: &DecaySweep, k: u32, spread_tol: f64) -> Result<LeadingCoefficient> {
    leading_coefficient_of(&sweep.t_values, &sweep.magnitudes, k, spread_tol)
}

pub fn leading_coefficient_of(
    t: &[f64],
    magnitudes: &[f64],
    k: u32,
    spread_tol: f64,
) -> Result<LeadingCoefficient> {
    if k == 0 {
        return Err(Error::InvalidSpec("order k must be positive".into()));
    }
    let Some(&t_last) = t.last() else {
        return Err(Error::InsufficientData("empty sweep".into()));
    };
    if t_last / t[0] < 10.0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientData("leading coefficient needs a full decade".into()));
    }
    let cut = t_last / 10.0 * (1.0 - 1e-12);
    let samples: Vec<(f64, f64)> = t
        .iter()
        .zip(magnitudes)
        .filter(|(tv, _)| **tv >= cut)
        .map(|(tv, m)| (*tv, tv.powf(1.0 / k as f64) * m))
        .collect();
    let mut scaled: Vec<f64> = samples.iter().map(|s| s.1).collect();
    scaled.sort_by(f64::total_cmp);
    let len = scaled.len();
    let a0 = if len % 2 == 1 { scaled[len / 2] } else { 0.5 * (scaled[len / 2 - 1] + scaled[len / 2]) };
    let spread = if a0 > 0.0 { (scaled[len - 1] - scaled[0]) / a0 } else { f64::INFINITY };
    Ok(LeadingCoefficient {
        k,
        a0,
        spread,
        spread_tol,
        converged: a0 > 0.0 && spread < spread_tol,
        samples,
    })
}

/// `int_{-rho}^{rho} e^{i t u^{beta_n}} Psi_n(u) du`: the part of
/// `I(t e_n)` carried by the complement of the polar weight.
pub fn slice_part(
    beta_n: u32,
    t: f64,
    part: &PartitionSpec,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    let rho = (1.0 - part.t_lo * part.t_lo).sqrt();
    oscillatory_interval(
        &[(t, beta_n)],
        -rho,
        rho,
        0.05,
        |u| Complex64::new(slice_value(part, u).unwrap_or(0.0), 0.0),
        sphere_area(part.n),
        quad,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_decade: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub direction: Vec<f64>,
    pub fitted: f64,
    pub predicted: f64,
    /// `-1/beta_max`.
    pub rate_bound: f64,
    pub rate_ok: bool,
    /// Present when every critical point is nondegenerate.
    pub nondegenerate_ok: Option<bool>,
}

impl RateCertificate {
    pub fn passed(&self) -> bool {
        self.rate_ok && self.nondegenerate_ok.unwrap_or(true)
    }
}

/// Checks the fitted exponent against `-1/beta_max` and, when all critical
/// points are nondegenerate, against `-(n-1)/2`.
pub fn verify_rate_certificates(
    beta: &[u32],
    directions: &[Vec<f64>],
    params: &SweepParams,
    quad: &QuadratureConfig,
    crit: &CriticalConfig,
) -> Result<Vec<RateCertificate>> {
    let n = beta.len();
    let part = PartitionSpec::standard(n);
    directions
        .iter()
        .map(|xi| {
            let spec = PhaseSpec::along(beta.to_vec(), xi, 1.0)?;
            let sets = critical_sets(&spec, &part, crit)?;
            let prediction = decay_bound(&sets, &spec)?;
            let sweep = decay_sweep(beta, xi, params.t_min, params.t_max, params.points_per_decade, quad)?;
            let fit = fit_envelope(&sweep)?;
            let rate_bound = -1.0 / spec.beta_max() as f64;
            let all_nondegenerate = sets.iter().flat_map(|s| &s.points).all(|p| !p.degenerate);
            let stationary = -(n as f64 - 1.0) / 2.0;
            Ok(RateCertificate {
                direction: xi.clone(),
                fitted: fit.exponent,
                predicted: prediction.exponent,
                rate_bound,
                rate_ok: fit.exponent <= rate_bound + 0.05,
                nondegenerate_ok: all_nondegenerate.then(|| (fit.exponent - stationary).abs() <= 0.05),
            })
        })
        .collect()
}

/// A chart piece `int e^{i t phi_xi} chi(y') dy'/|y_k|` with a smooth
/// tensor bump `chi` on the box `|y'_i - center_i| < half_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcisedPiece {
    pub chart: Chart,
    pub center: Vec<f64>,
    pub half_width: f64,
}

#[inline]
fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

impl ExcisedPiece {
    pub fn validate(&self, unit: &PhaseSpec, crit: &CriticalConfig) -> Result<()> {
        let d = self.chart.n - 1;
        if self.center.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.center.len() });
        }
        let reach: f64 = self
            .center
            .iter()
            .map(|c| (c.abs() + self.half_width).powi(2))
            .sum::<f64>();
        if reach > self.chart.domain_radius_sq {
            return Err(Error::OutsideChart { norm_sq: reach, limit: self.chart.domain_radius_sq });
        }
        let set = find_critical_points(unit, &self.chart, crit)?;
        let hit = set.points.iter().any(|p| {
            p.yprime
                .iter()
                .zip(&self.center)
                .enumerate()
                .all(|(i, (y, c))| p.free_axes.contains(&i) || (y - c).abs() < self.half_width)
        });
        if hit || !set.complete {
            return Err(Error::InvalidSpec("bump support contains a critical point".into()));
        }
        Ok(())
    }

    fn weight(&self, yp: &[f64]) -> f64 {
        let b: f64 = yp
            .iter()
            .zip(&self.center)
            .map(|(y, c)| bump((y - c) / self.half_width))
            .product();
        if b == 0.0 {
            0.0
        } else {
            b / self.chart.pivot(yp).abs()
        }
    }
}

/// The excised chart integral at `lambda = t xi`.
pub fn excised_integral(
    spec: &PhaseSpec,
    piece: &ExcisedPiece,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    let rate: f64 = spec.beta().iter().zip(spec.lambda()).map(|(&b, l)| b as f64 * l.abs()).sum();
    let chart = piece.chart;
    let integrand = |yp: &[f64]| -> Complex64 {
        let w = piece.weight(yp);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let (s, c) = spec.eval_unchecked(&chart.lift_unchecked(yp)).sin_cos();
        Complex64::new(c, s) * w
    };
    let (c0, w) = (piece.center[0], piece.half_width);
    match chart.n {
        2 => smooth_oscillatory(c0 - w, c0 + w, rate, 32, |y| integrand(&[y]), 1.0, quad),
        3 => {
            // tensor Gauss-Legendre, doubled until stable
            let rule = gauss_legendre(16);
            let c1 = piece.center[1];
            let mut panels = ((rate * 2.0 * w / (0.5 * PI)).ceil() as usize).max(16);
            let eval = |p: usize| -> Complex64 {
                let xs = composite_nodes(&rule, c0 - w, c0 + w, p);
                let ys = composite_nodes(&rule, c1 - w, c1 + w, p);
                xs.iter()
                    .map(|&(x, wx)| ys.iter().map(|&(y, wy)| integrand(&[x, y]) * wy).sum::<Complex64>() * wx)
                    .sum()
            };
            let mut coarse = eval(panels);
            loop {
                panels *= 2;
                let fine = eval(panels);
                let err = (fine - coarse).norm();
                if err <= quad.abs_tol.max(quad.rel_tol * fine.norm()) {
                    return Ok(fine);
                }
                if panels * 16 > 1 << 14 {
                    return Err(Error::NotConverged { estimate: err, nodes: panels * 16 });
                }
                coarse = fine;
            }
        }
        n => Err(Error::InvalidSpec(format!("excised pieces cover n = 2, 3 only (got {n})"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcisedDecay {
    pub t_values: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fit: DecayFit,
    /// `(N, fitted exponent < -N)` for `N = 1, 2, 3`.
    pub certificates: Vec<(u32, bool)>,
}

/// Sweep of an excised piece and the super-polynomial decay certificates.
pub fn excised_decay(
    beta: &[u32],
    xi: &[f64],
    piece: &ExcisedPiece,
    params: &SweepParams,
    quad: &QuadratureConfig,
    crit: &CriticalConfig,
) -> Result<ExcisedDecay> {
    let unit = PhaseSpec::along(beta.to_vec(), xi, 1.0)?;
    piece.validate(&unit, crit)?;
    let t_values = geometric_grid(params.t_min, params.t_max, params.points_per_decade)?;
    let magnitudes = t_values
        .par_iter()
        .map(|&t| Ok(excised_integral(&PhaseSpec::along(beta.to_vec(), xi, t)?, piece, quad)?.norm()))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_samples(&t_values, &magnitudes, params.points_per_decade, EnvelopeMethod::SlidingRms)?;
    let certificates = (1..=3).map(|n| (n, fit.exponent < -(n as f64))).collect();
    Ok(ExcisedDecay { t_values, magnitudes, fit, certificates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::Sign;

    fn q2() -> QuadratureConfig {
        QuadratureConfig::for_dimension(2)
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let t = geometric_grid(1e2, 1e5, 16).unwrap();
        let m: Vec<f64> = t.iter().map(|v| 3.0 * v.powf(-1.0 / 3.0)).collect();
        for (method, window) in
            [(EnvelopeMethod::SlidingRms, 16), (EnvelopeMethod::BlockMax, 4), (EnvelopeMethod::Raw, 16)]
        {
            let fit = fit_samples(&t, &m, window, method).unwrap();
            assert!((fit.exponent + 1.0 / 3.0).abs() < 1e-6, "{method:?}: {}", fit.exponent);
            assert!(fit.residual < 1e-9);
        }
        let lc = leading_coefficient_of(&t, &m, 3, 0.05).unwrap();
        assert!((lc.a0 - 3.0).abs() < 1e-12);
        assert!(lc.spread < 1e-12);
        assert!(lc.converged);
    }

    #[test]
    fn sliding_windows_give_enough_points() {
        let t = geometric_grid(1e2, 1e5, 16).unwrap();
        assert_eq!(t.len(), 49);
        assert_eq!(envelope_points(&t, &t, 16, EnvelopeMethod::SlidingRms).len(), 34);
        assert_eq!(envelope_points(&t, &t, 16, EnvelopeMethod::BlockMax).len(), 3);
    }

    #[test]
    fn short_data_is_rejected() {
        let t = geometric_grid(1e2, 3e2, 16).unwrap();
        let m = vec![1.0; t.len()];
        assert!(matches!(fit_samples(&t, &m, 16, EnvelopeMethod::SlidingRms), Err(Error::InsufficientData(_))));
        assert!(geometric_grid(1.0, 10.0, 4).is_err());
    }

    #[test]
    fn degenerate_sweep_is_single_sample() {
        let xi = [0.0, 1.0];
        let s = decay_sweep(&[3, 3], &xi, 50.0, 50.0, 16, &q2()).unwrap();
        assert_eq!(s.t_values, vec![50.0]);
        let direct = sphere_integral(&PhaseSpec::new(vec![3, 3], vec![0.0, 50.0]).unwrap(), &q2()).unwrap();
        assert_eq!(s.values[0], direct);
    }

    #[test]
    fn sweeps_are_deterministic_and_bounded() {
        let xi = [0.6, 0.8];
        let a = decay_sweep(&[3, 3], &xi, 10.0, 1e3, 8, &q2()).unwrap();
        let b = decay_sweep(&[3, 3], &xi, 10.0, 1e3, 8, &q2()).unwrap();
        assert_eq!(a, b);
        assert!(a.magnitudes.iter().all(|m| *m <= 2.0 * PI));
    }

    #[test]
    fn excised_piece_rejects_critical_points() {
        let part = PartitionSpec::standard(2);
        let chart = Chart::new(2, 1, Sign::Plus, &part).unwrap();
        let unit = PhaseSpec::new(vec![3, 3], vec![0.0, 1.0]).unwrap();
        let crit = CriticalConfig::for_dimension(2);
        let bad = ExcisedPiece { chart, center: vec![0.1], half_width: 0.25 };
        assert!(bad.validate(&unit, &crit).is_err());
        let good = ExcisedPiece { chart, center: vec![0.45], half_width: 0.25 };
        assert!(good.validate(&unit, &crit).is_ok());
    }

    #[test]
    fn excised_piece_matches_direct_quadrature() {
        // oracle: dense composite Simpson on the bump support
        let part = PartitionSpec::standard(2);
        let chart = Chart::new(2, 1, Sign::Plus, &part).unwrap();
        let piece = ExcisedPiece { chart, center: vec![0.45], half_width: 0.25 };
        let spec = PhaseSpec::new(vec![3, 3], vec![0.0, 30.0]).unwrap();
        let got = excised_integral(&spec, &piece, &q2()).unwrap();
        let n = 200_000;
        let h = 0.5 / n as f64;
        let f = |y: f64| -> Complex64 {
            let u = (y - 0.45) / 0.25;
            let y2 = (1.0 - y * y).sqrt();
            Complex64::from_polar(bump(u) / y2, 30.0 * y2 * y2 * y2)
        };
        let mut acc = f(0.2) + f(0.7);
        for i in 1..n {
            acc += f(0.2 + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = acc * (h / 3.0);
        assert!((got - oracle).norm() < 1e-12, "{got} vs {oracle}");
    }
}
