//! Small numerical building blocks shared by the quadrature and
//! critical-point code: exact integer powers, cached Gauss-Legendre
//! rules, and truncated Taylor series arithmetic.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

/// `x^e` by repeated multiplication. Negative exponents return the
/// reciprocal of the positive power, so signs of odd powers stay exact.
#[inline]
pub fn ipow(x: f64, e: i32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..e.unsigned_abs() {
        acc *= x;
    }
    if e < 0 {
        1.0 / acc
    } else {
        acc
    }
}

/// Nodes and weights of an `order`-point Gauss-Legendre rule on [-1, 1],
/// sorted by node.
pub type Rule = Arc<Vec<(f64, f64)>>;

pub fn gauss_legendre(order: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss-legendre cache poisoned");
    guard
        .entry(order)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order must be positive"));
            let mut pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(pairs)
        })
        .clone()
}

/// Applies `rule` on `[a, b]` split into `panels` equal panels.
pub fn composite_nodes(rule: &[(f64, f64)], a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(rule.len() * panels);
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        for &(x, w) in rule {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Truncated power series `c_0 + c_1 t + ... + c_K t^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub coeffs: Vec<f64>,
}

impl Series {
    pub fn constant(c: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = c;
        Series { coeffs }
    }

    /// `c + t`.
    pub fn variable(c: f64, order: usize) -> Self {
        let mut s = Series::constant(c, order);
        if order >= 1 {
            s.coeffs[1] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn add(&self, other: &Series) -> Series {
        Series {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Series {
        Series {
            coeffs: self.coeffs.iter().map(|a| a * k).collect(),
        }
    }

    pub fn mul(&self, other: &Series) -> Series {
        let k = self.order();
        let mut coeffs = vec![0.0; k + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(k + 1 - i) {
                coeffs[i + j] += a * b;
            }
        }
        Series { coeffs }
    }

    pub fn powi(&self, e: u32) -> Series {
        let mut acc = Series::constant(1.0, self.order());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Square root; requires a positive constant term.
    pub fn sqrt(&self) -> Series {
        let k = self.order();
        let a = &self.coeffs;
        let mut s = vec![0.0; k + 1];
        s[0] = a[0].sqrt();
        for n in 1..=k {
            let cross: f64 = (1..n).map(|j| s[j] * s[n - j]).sum();
            s[n] = (a[n] - cross) / (2.0 * s[0]);
        }
        Series { coeffs: s }
    }

    /// `d`-th derivative at the expansion point.
    pub fn derivative(&self, d: usize) -> f64 {
        let fact: f64 = (1..=d).map(|i| i as f64).product();
        self.coeffs[d] * fact
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ipow_keeps_sign_of_odd_powers() {
        assert_eq!(ipow(-0.5, 3), -0.125);
        assert_eq!(ipow(-2.0, 4), 16.0);
        assert_eq!(ipow(2.0, -2), 0.25);
        assert_eq!(ipow(7.0, 0), 1.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(8);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let nodes = composite_nodes(&rule, 0.0, 3.0, 5);
        let s: f64 = nodes.iter().map(|(x, w)| w * x * x).sum();
        assert!((s - 9.0).abs() < 1e-12);
    }

    #[test]
    fn series_sqrt_matches_binomial_expansion() {
        // sqrt(1 - t^2) = 1 - t^2/2 - t^4/8 - ...
        let t = Series::variable(0.0, 6);
        let one = Series::constant(1.0, 6);
        let s = one.add(&t.mul(&t).scale(-1.0)).sqrt();
        assert!((s.coeffs[2] + 0.5).abs() < 1e-15);
        assert!((s.coeffs[4] + 0.125).abs() < 1e-15);
        assert!(s.coeffs[1].abs() < 1e-15);
    }

    #[test]
    fn series_derivatives_of_cube() {
        let t = Series::variable(0.5, 5);
        let c = t.powi(3);
        assert!((c.derivative(0) - 0.125).abs() < 1e-15);
        assert!((c.derivative(1) - 0.75).abs() < 1e-15);
        assert!((c.derivative(3) - 6.0).abs() < 1e-14);
        assert_eq!(c.derivative(4), 0.0);
    }
}
