//! Tail sums and limit extrapolation.
//!
//! [`Jet`] carries a truncated Taylor expansion so the Euler–Maclaurin
//! correction terms can be formed from the same closure that evaluates the
//! summand. [`extrapolate_limit`] fits partial sums that approach their limit
//! in inverse powers of the cutoff.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;

/// f(x₀ + h) ≈ c₀ + c₁h + c₂h² + c₃h³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet(pub [f64; 4]);

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet([v, 0.0, 0.0, 0.0])
    }

    pub fn variable(x: f64) -> Self {
        Jet([x, 1.0, 0.0, 0.0])
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// The k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact = [1.0, 1.0, 2.0, 6.0][k];
        self.0[k] * fact
    }

    pub fn recip(self) -> Self {
        let [a0, a1, a2, a3] = self.0;
        let r0 = 1.0 / a0;
        let r1 = -a1 * r0 * r0;
        let r2 = -(a1 * r1 + a2 * r0) * r0;
        let r3 = -(a1 * r2 + a2 * r1 + a3 * r0) * r0;
        Jet([r0, r1, r2, r3])
    }

    pub fn powi(self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut out = Jet::constant(1.0);
        let mut base = self;
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                out = out * base;
            }
            base = base * base;
            e >>= 1;
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|v| -v))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let a = self.0;
        let b = o.0;
        Jet([
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[1] * b[1] + a[2] * b[0],
            a[0] * b[3] + a[1] * b[2] + a[2] * b[1] + a[3] * b[0],
        ])
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.0[0] += c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        Jet(self.0.map(|v| v * c))
    }
}

/// Σ_{n ≥ n0} f(n) for a smooth summand decaying at least like n⁻².
///
/// Uses ∫_{n0}^∞ f + f(n0)/2 − f′(n0)/12 + f‴(n0)/720; the integral is taken
/// in the variable t = n0/x so the infinite range becomes (0, 1].
pub fn euler_maclaurin_tail<F: Fn(Jet) -> Jet>(f: F, n0: usize) -> Result<f64> {
    let x0 = n0 as f64;
    if x0 < 1.0 {
        return Err(Error::Domain("Euler-Maclaurin tail must start at n >= 1".into()));
    }
    let at = f(Jet::variable(x0));
    let scale = at.value().abs() * x0;
    let integrand = |t: f64| f(Jet::constant(x0 / t)).value() * x0 / (t * t);
    let integral = integrate_adaptive(&integrand, 0.0, 1.0, 1e-15 * scale.max(1e-300))?;
    Ok(integral + 0.5 * at.value() - at.derivative(1) / 12.0 + at.derivative(3) / 720.0)
}

/// Least-squares fit v(N) = v∞ + Σ_{k=1}^{order} a_k (N₀/N)^k; returns v∞.
pub fn fit_power_tail(ns: &[f64], values: &[f64], order: usize) -> Result<f64> {
    if ns.len() != values.len() || ns.len() < order + 1 {
        return Err(Error::Domain(format!(
            "power-tail fit of order {order} needs at least {} samples",
            order + 1
        )));
    }
    let n0 = ns.iter().cloned().fold(f64::INFINITY, f64::min);
    let rows = ns.len();
    let x = DMatrix::from_fn(rows, order + 1, |i, k| (n0 / ns[i]).powi(k as i32));
    let y = DVector::from_column_slice(values);
    let svd = x.svd(true, true);
    let sol = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::NoConvergence(format!("power-tail fit: {e}")))?;
    Ok(sol[0])
}

/// Limit of a sequence of partial sums with an error estimate from two fit orders.
pub fn extrapolate_limit(ns: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    let high = (ns.len() - 2).min(6);
    let low = high.saturating_sub(2).max(1);
    let a = fit_power_tail(ns, values, high)?;
    let b = fit_power_tail(ns, values, low)?;
    Ok((a, (a - b).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn jet_derivatives_of_rational_function() {
        // f(x) = x² / (x+1)³ at x = 3
        let x = Jet::variable(3.0);
        let f = x * x / (x + 1.0).powi(3);
        let g = |x: f64| x * x / (x + 1.0).powi(3);
        let h = 1e-2;
        let d1 = (g(3.0 + h) - g(3.0 - h)) / (2.0 * h);
        let d3 = (g(3.0 + 2.0 * h) - 2.0 * g(3.0 + h) + 2.0 * g(3.0 - h) - g(3.0 - 2.0 * h))
            / (2.0 * h.powi(3));
        assert_relative_eq!(f.value(), 9.0 / 64.0, max_relative = 1e-15);
        assert_relative_eq!(f.derivative(1), d1, max_relative = 1e-4);
        assert_relative_eq!(f.derivative(3), d3, max_relative = 1e-3);
    }

    #[test]
    fn basel_tail() {
        let direct: f64 = (1..100).map(|n| 1.0 / (n as f64).powi(2)).sum();
        let tail = euler_maclaurin_tail(|x| x.powi(-2), 100).unwrap();
        assert!((direct + tail - PI * PI / 6.0).abs() < 1e-14, "{}", direct + tail - PI * PI / 6.0);
    }

    #[test]
    fn extrapolates_polynomial_tail() {
        let ns: Vec<f64> = (10..=20).map(|n| (10 * n) as f64).collect();
        let vals: Vec<f64> = ns.iter().map(|n| 2.5 + 3.0 / n - 7.0 / (n * n) + 1.0 / n.powi(3)).collect();
        let (v, err) = extrapolate_limit(&ns, &vals).unwrap();
        assert!((v - 2.5).abs() < 1e-10, "{v} {err}");
        assert!(err < 1e-9);
    }
}
