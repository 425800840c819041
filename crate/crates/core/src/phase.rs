//! Monomial phases on the unit sphere, hemisphere graph charts, and the
//! smooth partition of unity subordinate to the coordinate caps.
//!
//! A phase is `phi(y) = sum_j lambda_j * y_j^beta_j`. On the chart with
//! pivot index `k` and sign `s`, the sphere is the graph
//! `y_k = s * sqrt(1 - |y'|^2)` over the remaining coordinates `y'`, and the
//! chart gradient and Hessian below are the exact derivatives of
//! `phi(lift(y'))`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ipow;

/// Coefficients and exponents of a monomial phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    beta: Vec<u32>,
    lambda: Vec<f64>,
    beta_max: u32,
}

impl PhaseSpec {
    pub fn new(beta: Vec<u32>, lambda: Vec<f64>) -> Result<Self> {
        let n = beta.len();
        if n < 2 {
            return Err(Error::InvalidSpec(format!("dimension n = {n} must be at least 2")));
        }
        if lambda.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: lambda.len() });
        }
        if let Some(b) = beta.iter().find(|&&b| b < 3) {
            return Err(Error::InvalidSpec(format!("phase exponent {b} < 3")));
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidSpec("non-finite phase coefficient".into()));
        }
        let beta_max = *beta.iter().max().expect("n >= 2");
        Ok(PhaseSpec { beta, lambda, beta_max })
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[u32] {
        &self.beta
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn beta_max(&self) -> u32 {
        self.beta_max
    }

    /// Euclidean norm `|lambda|`.
    pub fn magnitude(&self) -> f64 {
        self.lambda.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// Unit direction `xi = lambda / |lambda|`, or `None` for the zero phase.
    pub fn direction(&self) -> Option<Vec<f64>> {
        let m = self.magnitude();
        (m > 0.0).then(|| self.lambda.iter().map(|l| l / m).collect())
    }

    /// The same exponents with coefficients replaced by `lambda`.
    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self> {
        PhaseSpec::new(self.beta.clone(), lambda)
    }

    /// `phi_xi`, the phase normalised to a unit coefficient vector.
    pub fn unit(&self) -> Result<Self> {
        let xi = self
            .direction()
            .ok_or_else(|| Error::InvalidSpec("zero phase has no direction".into()))?;
        self.with_lambda(xi)
    }

    /// Phase with coefficients `t * xi` for a unit direction `xi`.
    pub fn along(beta: Vec<u32>, xi: &[f64], t: f64) -> Result<Self> {
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!("direction has norm {norm}, expected 1")));
        }
        PhaseSpec::new(beta, xi.iter().map(|x| x * t).collect())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, y: &[f64]) -> f64 {
        self.beta
            .iter()
            .zip(&self.lambda)
            .zip(y)
            .map(|((&b, &l), &yj)| if l == 0.0 { 0.0 } else { l * ipow(yj, b as i32) })
            .sum()
    }
}

/// Sufficient/necessary exponent bookkeeping works on this operator description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    alpha: Vec<u32>,
    m: u32,
    alpha_max: u32,
    out_of_theorem: bool,
}

impl OperatorSpec {
    /// Validates `alpha_j >= 3` and `2 <= n < m <= n * alpha_max`.
    pub fn new(alpha: Vec<u32>, m: u32) -> Result<Self> {
        let spec = OperatorSpec::out_of_theorem(alpha, m)?;
        let n = spec.n() as u32;
        if m <= n {
            return Err(Error::InvalidSpec(format!("m must exceed n ({m} <= {n})")));
        }
        if m > n * spec.alpha_max {
            return Err(Error::InvalidSpec(format!(
                "m exceeds nα_max ({m} > {})",
                n * spec.alpha_max
            )));
        }
        Ok(OperatorSpec { out_of_theorem: false, ..spec })
    }

    /// Skips the `n < m <= n * alpha_max` hypothesis; the flag travels with the spec.
    pub fn out_of_theorem(alpha: Vec<u32>, m: u32) -> Result<Self> {
        let n = alpha.len();
        if n < 2 {
            return Err(Error::InvalidSpec(format!("dimension n = {n} must be at least 2")));
        }
        if let Some(a) = alpha.iter().find(|&&a| a < 3) {
            return Err(Error::InvalidSpec(format!("operator exponent {a} < 3")));
        }
        if m == 0 {
            return Err(Error::InvalidSpec("m must be positive".into()));
        }
        let alpha_max = *alpha.iter().max().expect("n >= 2");
        let in_range = m > n as u32 && m <= n as u32 * alpha_max;
        Ok(OperatorSpec { alpha, m, alpha_max, out_of_theorem: !in_range })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[u32] {
        &self.alpha
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn alpha_max(&self) -> u32 {
        self.alpha_max
    }

    /// True when the spec violates the theorem's hypothesis range.
    pub fn is_out_of_theorem(&self) -> bool {
        self.out_of_theorem
    }
}

/// Upper (`+1`) or lower (`-1`) hemisphere of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Graph chart `y_k = sign * sqrt(1 - |y'|^2)` over `|y'|^2 <= 1 - t_lo^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    /// Zero-based pivot coordinate.
    pub k: usize,
    pub sign: Sign,
    pub n: usize,
    /// Squared radius of the chart domain in `y'`.
    pub domain_radius_sq: f64,
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "k={}{}", self.k + 1, s)
    }
}

impl Chart {
    pub fn new(n: usize, k: usize, sign: Sign, part: &PartitionSpec) -> Result<Self> {
        if k >= n {
            return Err(Error::InvalidSpec(format!("chart index {k} out of range for n = {n}")));
        }
        Ok(Chart { k, sign, n, domain_radius_sq: 1.0 - part.t_lo * part.t_lo })
    }

    /// All `2n` charts for the partition's thresholds, ordered by `(k, sign)`.
    pub fn all(part: &PartitionSpec) -> Vec<Chart> {
        (0..part.n)
            .flat_map(|k| {
                [Sign::Plus, Sign::Minus].map(|s| Chart::new(part.n, k, s, part).expect("k < n"))
            })
            .collect()
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius_sq.sqrt()
    }

    /// Index in the full coordinate vector of the `i`-th chart coordinate.
    #[inline]
    pub fn full_index(&self, i: usize) -> usize {
        if i < self.k {
            i
        } else {
            i + 1
        }
    }

    pub fn check_domain(&self, yprime: &[f64]) -> Result<()> {
        if yprime.len() != self.n - 1 {
            return Err(Error::DimensionMismatch { expected: self.n - 1, got: yprime.len() });
        }
        let norm_sq: f64 = yprime.iter().map(|v| v * v).sum();
        if norm_sq > self.domain_radius_sq * (1.0 + 1e-12) {
            return Err(Error::OutsideChart { norm_sq, limit: self.domain_radius_sq });
        }
        Ok(())
    }

    /// Signed pivot coordinate `y_k` above `y'`.
    #[inline]
    pub fn pivot(&self, yprime: &[f64]) -> f64 {
        let r2: f64 = yprime.iter().map(|v| v * v).sum();
        self.sign.value() * (1.0 - r2).max(0.0).sqrt()
    }

    pub fn lift(&self, yprime: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(yprime)?;
        Ok(self.lift_unchecked(yprime))
    }

    #[inline]
    pub(crate) fn lift_unchecked(&self, yprime: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.n);
        y.extend_from_slice(&yprime[..self.k]);
        y.push(self.pivot(yprime));
        y.extend_from_slice(&yprime[self.k..]);
        y
    }

    /// Drops the pivot coordinate.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        y.iter().enumerate().filter(|(i, _)| *i != self.k).map(|(_, v)| *v).collect()
    }
}

/// Smooth partition of unity `psi_k = g(|y_k|) / sum_l g(|y_l|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n: usize,
    pub t_lo: f64,
    pub t_hi: f64,
}

/// `exp(-1/s)` for `s > 0`, zero otherwise.
#[inline]
fn flat_exp(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

impl PartitionSpec {
    /// Thresholds `t_lo = 1/(2 sqrt n)` and `t_hi = 1/sqrt n`.
    pub fn standard(n: usize) -> Self {
        let r = (n as f64).sqrt();
        PartitionSpec { n, t_lo: 0.5 / r, t_hi: 1.0 / r }
    }

    pub fn new(n: usize, t_lo: f64, t_hi: f64) -> Result<Self> {
        let r = (n as f64).sqrt();
        if !(0.0 < t_lo && t_lo < t_hi && t_hi <= 1.0 / r) {
            return Err(Error::InvalidSpec(format!(
                "partition thresholds need 0 < t_lo < t_hi <= 1/sqrt(n), got {t_lo}, {t_hi}"
            )));
        }
        Ok(PartitionSpec { n, t_lo, t_hi })
    }

    /// C-infinity ramp: 0 on `(-inf, t_lo]`, 1 on `[t_hi, inf)`.
    #[inline]
    pub fn ramp(&self, t: f64) -> f64 {
        let u = (t - self.t_lo) / (self.t_hi - self.t_lo);
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            let a = flat_exp(u);
            a / (a + flat_exp(1.0 - u))
        }
    }

    pub fn weights(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: y.len() });
        }
        let deviation = y.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0;
        if deviation.abs() > 1e-12 {
            return Err(Error::NotOnSphere { deviation });
        }
        Ok(self.weights_unchecked(y))
    }

    #[inline]
    pub(crate) fn weights_unchecked(&self, y: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = y.iter().map(|v| self.ramp(v.abs())).collect();
        let total: f64 = g.iter().sum();
        g.into_iter().map(|v| v / total).collect()
    }

    #[inline]
    pub(crate) fn weight_unchecked(&self, k: usize, y: &[f64]) -> f64 {
        let gk = self.ramp(y[k].abs());
        if gk == 0.0 {
            return 0.0;
        }
        let total: f64 = y.iter().map(|v| self.ramp(v.abs())).sum();
        gk / total
    }
}

pub fn eval_phase(spec: &PhaseSpec, y: &[f64]) -> Result<f64> {
    if y.len() != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), got: y.len() });
    }
    Ok(spec.eval_unchecked(y))
}

/// Gradient of `phi(lift(y'))` with respect to the chart coordinates.
pub fn grad_chart(spec: &PhaseSpec, chart: &Chart, yprime: &[f64]) -> Result<Vec<f64>> {
    check_chart(spec, chart)?;
    chart.check_domain(yprime)?;
    Ok(grad_chart_unchecked(spec, chart, yprime))
}

pub(crate) fn grad_chart_unchecked(spec: &PhaseSpec, chart: &Chart, yprime: &[f64]) -> Vec<f64> {
    let k = chart.k;
    let yk = chart.pivot(yprime);
    let bk = spec.beta[k] as i32;
    let pivot_term = bk as f64 * spec.lambda[k] * ipow(yk, bk - 2);
    yprime
        .iter()
        .enumerate()
        .map(|(i, &yj)| {
            let j = chart.full_index(i);
            let bj = spec.beta[j] as i32;
            bj as f64 * spec.lambda[j] * ipow(yj, bj - 1) - pivot_term * yj
        })
        .collect()
}

/// Hessian of `phi(lift(y'))` in the chart coordinates.
pub fn hessian_chart(spec: &PhaseSpec, chart: &Chart, yprime: &[f64]) -> Result<DMatrix<f64>> {
    check_chart(spec, chart)?;
    chart.check_domain(yprime)?;
    Ok(hessian_chart_unchecked(spec, chart, yprime))
}

pub(crate) fn hessian_chart_unchecked(
    spec: &PhaseSpec,
    chart: &Chart,
    yprime: &[f64],
) -> DMatrix<f64> {
    let d = yprime.len();
    let k = chart.k;
    let yk = chart.pivot(yprime);
    let bk = spec.beta[k] as i32;
    let lk = spec.lambda[k];
    let diag_shift = bk as f64 * lk * ipow(yk, bk - 2);
    let coupling = bk as f64 * (bk - 2) as f64 * lk * ipow(yk, bk - 4);
    DMatrix::from_fn(d, d, |a, b| {
        let mut h = coupling * (yprime[a] * yprime[b]);
        if a == b {
            let j = chart.full_index(a);
            let bj = spec.beta[j] as i32;
            h += bj as f64 * (bj - 1) as f64 * spec.lambda[j] * ipow(yprime[a], bj - 2) - diag_shift;
        }
        h
    })
}

fn check_chart(spec: &PhaseSpec, chart: &Chart) -> Result<()> {
    if chart.n != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), got: chart.n });
    }
    Ok(())
}

pub fn partition_weights(part: &PartitionSpec, y: &[f64]) -> Result<Vec<f64>> {
    part.weights(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(beta: &[u32], lambda: &[f64]) -> PhaseSpec {
        PhaseSpec::new(beta.to_vec(), lambda.to_vec()).unwrap()
    }

    fn chart(n: usize, k: usize, sign: Sign) -> Chart {
        Chart::new(n, k, sign, &PartitionSpec::standard(n)).unwrap()
    }

    #[test]
    fn eval_phase_examples() {
        assert_eq!(eval_phase(&spec(&[3, 3], &[0.0, 0.0]), &[0.3, -0.7]).unwrap(), 0.0);
        assert_eq!(eval_phase(&spec(&[3, 3], &[1.0, 1.0]), &[1.0, 0.0]).unwrap(), 1.0);
        let v = eval_phase(&spec(&[3, 4], &[2.0, -1.0]), &[0.5, 0.5]).unwrap();
        assert_eq!(v, 3.0 / 16.0);
        assert!(matches!(
            eval_phase(&spec(&[3, 3], &[1.0, 1.0]), &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spec_rejects_small_exponents_and_bad_coefficients() {
        assert!(PhaseSpec::new(vec![2, 3], vec![1.0, 1.0]).is_err());
        assert!(PhaseSpec::new(vec![3], vec![1.0]).is_err());
        assert!(PhaseSpec::new(vec![3, 3], vec![f64::NAN, 1.0]).is_err());
        assert_eq!(spec(&[3, 5, 4], &[0.0, 1.0, 0.0]).beta_max(), 5);
    }

    #[test]
    fn operator_spec_hypotheses() {
        assert!(OperatorSpec::new(vec![3, 3], 3).is_ok());
        let err = OperatorSpec::new(vec![3, 3], 7).unwrap_err();
        assert!(err.to_string().contains("m exceeds nα_max"));
        assert!(OperatorSpec::new(vec![3, 3], 2).is_err());
        assert!(OperatorSpec::new(vec![2, 3], 3).is_err());
        let flagged = OperatorSpec::out_of_theorem(vec![3, 3], 7).unwrap();
        assert!(flagged.is_out_of_theorem());
        assert!(!OperatorSpec::out_of_theorem(vec![3, 3], 4).unwrap().is_out_of_theorem());
    }

    #[test]
    fn grad_chart_examples() {
        let c = chart(2, 1, Sign::Plus);
        let g = grad_chart(&spec(&[3, 3], &[0.0, 1.0]), &c, &[0.0]).unwrap();
        assert_eq!(g, vec![0.0]);
        let g = grad_chart(&spec(&[3, 3], &[1.0, 0.0]), &c, &[0.5]).unwrap();
        assert!((g[0] - 0.75).abs() < 1e-15);
        assert!(matches!(
            grad_chart(&spec(&[3, 3], &[1.0, 0.0]), &c, &[0.99]),
            Err(Error::OutsideChart { .. })
        ));
    }

    #[test]
    fn hessian_chart_examples() {
        let c = chart(3, 2, Sign::Plus);
        let h = hessian_chart(&spec(&[3, 3, 3], &[0.0, 0.0, 1.0]), &c, &[0.0, 0.0]).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, -3.0]));
        let c = chart(2, 1, Sign::Plus);
        let h = hessian_chart(&spec(&[3, 3], &[1.0, 0.0]), &c, &[0.0]).unwrap();
        assert_eq!(h[(0, 0)], 0.0);
    }

    #[test]
    fn lower_hemisphere_flips_odd_pivot_term() {
        // (-1)^beta_k multiplies the pivot coefficient on the lower sheet.
        let s = spec(&[3, 3], &[0.3, 0.8]);
        let up = chart(2, 1, Sign::Plus);
        let down = chart(2, 1, Sign::Minus);
        let flipped = spec(&[3, 3], &[0.3, -0.8]);
        let a = grad_chart(&s, &down, &[0.4]).unwrap();
        let b = grad_chart(&flipped, &up, &[0.4]).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-15);
    }

    #[test]
    fn partition_examples() {
        let p = PartitionSpec::standard(2);
        assert_eq!(p.weights(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let w = p.weights(&[r, r]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        let g = p.ramp(0.6);
        assert!(g > 0.0 && g < 1.0);
        assert_eq!(p.ramp(0.8), 1.0);
        let w = p.weights(&[0.6, 0.8]).unwrap();
        assert!((w[0] - g / (g + 1.0)).abs() < 1e-15);
        assert!((w[1] - 1.0 / (g + 1.0)).abs() < 1e-15);
        assert!(matches!(p.weights(&[0.6, 0.7]), Err(Error::NotOnSphere { .. })));
    }

    #[test]
    fn ramp_is_monotone_and_flat_at_ends() {
        let p = PartitionSpec::standard(3);
        let mut prev = 0.0;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let g = p.ramp(t);
            assert!(g >= prev);
            prev = g;
        }
        assert_eq!(p.ramp(p.t_lo), 0.0);
        assert_eq!(p.ramp(p.t_hi), 1.0);
    }

    fn lift_phase(s: &PhaseSpec, c: &Chart, yp: &[f64]) -> f64 {
        eval_phase(s, &c.lift(yp).unwrap()).unwrap()
    }

    fn fd_grad(s: &PhaseSpec, c: &Chart, yp: &[f64], h: f64) -> Vec<f64> {
        (0..yp.len())
            .map(|i| {
                let mut a = yp.to_vec();
                let mut b = yp.to_vec();
                a[i] += h;
                b[i] -= h;
                (lift_phase(s, c, &a) - lift_phase(s, c, &b)) / (2.0 * h)
            })
            .collect()
    }

    fn fd_hessian(s: &PhaseSpec, c: &Chart, yp: &[f64], h: f64) -> DMatrix<f64> {
        let d = yp.len();
        DMatrix::from_fn(d, d, |i, j| {
            let f = |di: f64, dj: f64| {
                let mut p = yp.to_vec();
                p[i] += di;
                p[j] += dj;
                lift_phase(s, c, &p)
            };
            (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h)
        })
    }

    #[test]
    fn grad_matches_finite_differences_on_diagonal_direction() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = spec(&[3, 3], &[r, r]);
        let c = chart(2, 1, Sign::Plus);
        let g = grad_chart(&s, &c, &[0.6]).unwrap();
        let fd = fd_grad(&s, &c, &[0.6], 1e-5);
        assert!(((g[0] - fd[0]) / g[0]).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn derivatives_match_finite_differences(
            n in 2usize..=3,
            b in proptest::collection::vec(3u32..=6, 3),
            l in proptest::collection::vec(-1.0f64..1.0, 3),
            k in 0usize..3,
            minus in any::<bool>(),
            u in proptest::collection::vec(-1.0f64..1.0, 2),
        ) {
            let k = k % n;
            let s = spec(&b[..n], &l[..n]);
            let c = chart(n, k, if minus { Sign::Minus } else { Sign::Plus });
            // stay inside the domain, away from its rim
            let yp: Vec<f64> = u[..n - 1].iter().map(|v| v * 0.6).collect();
            let g = grad_chart(&s, &c, &yp).unwrap();
            let fd = fd_grad(&s, &c, &yp, 1e-5);
            for (a, e) in g.iter().zip(&fd) {
                prop_assert!((a - e).abs() <= 1e-6 * e.abs().max(1.0));
            }
            let h = hessian_chart(&s, &c, &yp).unwrap();
            let fdh = fd_hessian(&s, &c, &yp, 1e-4);
            for (a, e) in h.iter().zip(fdh.iter()) {
                prop_assert!((a - e).abs() <= 1e-4 * e.abs().max(1.0));
            }
            prop_assert!((h.clone() - h.transpose()).abs().max() == 0.0);
        }

        #[test]
        fn lift_stays_on_sphere(n in 2usize..=3, k in 0usize..3, u in proptest::collection::vec(-1.0f64..1.0, 2)) {
            let k = k % n;
            let c = chart(n, k, Sign::Minus);
            let mut yp: Vec<f64> = u[..n - 1].to_vec();
            let r: f64 = yp.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > c.domain_radius() {
                yp.iter_mut().for_each(|v| *v *= c.domain_radius() / r);
            }
            let y = c.lift(&yp).unwrap();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-14);
            prop_assert_eq!(c.project(&y), yp);
        }

        #[test]
        fn eval_phase_is_permutation_equivariant(
            b in proptest::collection::vec(3u32..=7, 3),
            l in proptest::collection::vec(-5.0f64..5.0, 3),
            y in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let s = spec(&b, &l);
            let v = eval_phase(&s, &y).unwrap();
            let perm = [2usize, 0, 1];
            let pb: Vec<u32> = perm.iter().map(|&i| b[i]).collect();
            let pl: Vec<f64> = perm.iter().map(|&i| l[i]).collect();
            let py: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
            let w = eval_phase(&spec(&pb, &pl), &py).unwrap();
            prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn partition_properties_on_sphere_samples() {
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3] {
            let p = PartitionSpec::standard(n);
            for _ in 0..10_000 {
                let mut y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let r = y.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
                y.iter_mut().for_each(|v| *v /= r);
                let w = p.weights(&y).unwrap();
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (wk, yk) in w.iter().zip(&y) {
                    assert!((0.0..=1.0).contains(wk));
                    if yk.abs() <= p.t_lo {
                        assert_eq!(*wk, 0.0);
                    }
                }
                let last = y[n - 1];
                if 1.0 - last * last < p.t_lo * p.t_lo {
                    assert_eq!(w[n - 1], 1.0);
                }
            }
        }
    }
}
