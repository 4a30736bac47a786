//! Green's functions of the Laplacian on S^d with the zero mode removed.
//!
//! G^{(d,q)}(Ω,Ω′) = Σ_{ℓ≥1} Σ_m⃗ Y_{ℓm⃗}(Ω)Y*_{ℓm⃗}(Ω′)/λ_ℓ^{q+1} depends only on
//! the angle θ between its arguments. The shifted kernel
//! G_γ = Σ_{ℓ≥0} (⋯)/(λ_ℓ + γ) expands as 1/(γVol) + Σ_q (−γ)^q G^{(d,q)}, and
//! for d = 2, 3, 4 the first three coefficients have elementary closed forms.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harmonics::{degeneracy, eigenvalue, gegenbauer_ratios};
use crate::special::{dilog, sphere_volume, trilog, ZETA3};
use crate::sumrules::{degeneracy_jet, eigenvalue_jet};
use crate::summation::euler_maclaurin_tail;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenOrder {
    pub d: usize,
    pub q: usize,
    pub gamma: Option<f64>,
}

impl GreenOrder {
    pub fn new(d: usize, q: usize, gamma: Option<f64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("sphere dimension must be at least 2, got {d}")));
        }
        if let Some(g) = gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Domain(format!("shift gamma = {g} must be positive")));
            }
        }
        Ok(GreenOrder { d, q, gamma })
    }

    pub fn unshifted(d: usize, q: usize) -> Result<Self> {
        Self::new(d, q, None)
    }

    /// Pointwise absolute convergence away from θ = 0: with g_ℓ ~ ℓ^{d−1} and
    /// Gegenbauer ratios decaying like ℓ^{−(d−1)/2}, the terms fall off as
    /// ℓ^{(d−1)/2 − 2(q+1)}.
    pub fn is_absolutely_convergent(&self) -> bool {
        (self.d as f64 - 1.0) / 2.0 - 2.0 * (self.q as f64 + 1.0) < -1.0
    }

    /// Whether Σ g_ℓ/λ_ℓ^{q+1} converges, which is what the tail bound needs.
    pub fn has_summable_envelope(&self) -> bool {
        2 * (self.q + 1) > self.d
    }

    fn weight(&self, ell: usize) -> f64 {
        let lam = eigenvalue(self.d, ell) + self.gamma.unwrap_or(0.0);
        lam.powi(-(self.q as i32 + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenValue {
    pub value: f64,
    /// Contribution of the constant mode, γ^{−(q+1)}/Vol; zero when unshifted.
    pub zero_mode: f64,
    /// The sum over ℓ ≥ 1 alone.
    pub regular_part: f64,
    /// Bound on the neglected terms from |C_ℓ(cos θ)/C_ℓ(1)| ≤ 1; infinite
    /// when that envelope is not summable.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularization {
    #[default]
    None,
    /// Σ r^ℓ a_ℓ at r = 0.95, 0.97, 0.99, extrapolated quadratically to r = 1.
    Abel,
}

fn envelope_tail(order: &GreenOrder, ell_cut: usize) -> Result<f64> {
    if !order.has_summable_envelope() {
        return Ok(f64::INFINITY);
    }
    let d = order.d;
    let gamma = order.gamma.unwrap_or(0.0);
    let q = order.q as i32 + 1;
    let tail = euler_maclaurin_tail(
        |x| degeneracy_jet(d, x) * (eigenvalue_jet(d, x) + gamma).powi(-q),
        ell_cut + 1,
    )?;
    Ok(tail / sphere_volume(d))
}

fn check_cos(cosgamma: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&cosgamma) {
        return Err(Error::Domain(format!("cos(gamma) = {cosgamma} outside [-1, 1]")));
    }
    Ok(())
}

/// Neumaier summation; long oscillating series lose several digits otherwise.
fn compensated_sum<I: Iterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for t in terms {
        let next = sum + t;
        carry += if sum.abs() >= t.abs() { (sum - next) + t } else { (t - next) + sum };
        sum = next;
    }
    sum + carry
}

fn zero_mode(order: &GreenOrder) -> f64 {
    match order.gamma {
        Some(g) => g.powi(-(order.q as i32 + 1)) / sphere_volume(order.d),
        None => 0.0,
    }
}

/// Truncated spectral sum of G^{(d,q)} (or its shifted version) at angle arccos(cosγ).
pub fn green_spectral(order: &GreenOrder, cosgamma: f64, ell_cut: usize) -> Result<GreenValue> {
    green_spectral_regularized(order, cosgamma, ell_cut, Regularization::None)
}

pub fn green_spectral_regularized(
    order: &GreenOrder,
    cosgamma: f64,
    ell_cut: usize,
    reg: Regularization,
) -> Result<GreenValue> {
    check_cos(cosgamma)?;
    let d = order.d;
    let vol = sphere_volume(d);
    let alpha = (d as f64 - 1.0) / 2.0;
    let conditional = !order.is_absolutely_convergent() || cosgamma == 1.0 && !order.has_summable_envelope();
    match reg {
        Regularization::None => {
            if conditional && order.gamma.is_none() {
                return Err(Error::Divergent(format!(
                    "G^({d},{}) is not absolutely convergent pointwise; use a shift or Abel summation",
                    order.q
                )));
            }
            let ratios = gegenbauer_ratios(alpha, ell_cut, cosgamma);
            let sum = compensated_sum((1..=ell_cut).map(|l| degeneracy(d, l) as f64 * ratios[l] * order.weight(l)));
            let zm = zero_mode(order);
            Ok(GreenValue { value: sum / vol + zm, zero_mode: zm, regular_part: sum / vol, tail_bound: envelope_tail(order, ell_cut)? })
        }
        Regularization::Abel => {
            if cosgamma == 1.0 && !order.has_summable_envelope() {
                return Err(Error::Divergent("coincident points have no finite Abel limit".into()));
            }
            let radii = [0.95, 0.97, 0.99];
            let horizon = (40.0 / (1.0 - radii[2])) as usize;
            let n = ell_cut.max(horizon);
            let ratios = gegenbauer_ratios(alpha, n, cosgamma);
            let sums: Vec<f64> = radii
                .iter()
                .map(|&r: &f64| {
                    let mut rl = 1.0;
                    let mut s = 0.0;
                    for l in 1..=n {
                        rl *= r;
                        s += rl * degeneracy(d, l) as f64 * ratios[l] * order.weight(l);
                    }
                    s / vol
                })
                .collect();
            // quadratic Lagrange extrapolation in h = 1 − r to h = 0
            let h: Vec<f64> = radii.iter().map(|r| 1.0 - r).collect();
            let mut limit = 0.0;
            for i in 0..3 {
                let mut basis = 1.0;
                for j in 0..3 {
                    if i != j {
                        basis *= (0.0 - h[j]) / (h[i] - h[j]);
                    }
                }
                limit += basis * sums[i];
            }
            let zm = zero_mode(order);
            Ok(GreenValue { value: limit + zm, zero_mode: zm, regular_part: limit, tail_bound: f64::INFINITY })
        }
    }
}

/// G^{(d,q)}(θ) from the γ-expansion of the shifted kernel, for d ∈ {2,3,4}, q ≤ 2.
pub fn green_closed_form(d: usize, q: usize, theta: f64) -> Result<f64> {
    if !(2..=4).contains(&d) || q > 2 {
        return Err(Error::Unsupported(format!("no closed form for G^({d},{q})")));
    }
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Domain(format!("closed form needs 0 < theta < pi, got {theta}")));
    }
    let coef = gamma_coefficient(d, q, theta);
    Ok(if q % 2 == 1 { -coef } else { coef })
}

/// Coefficient of γ^q in the small-γ expansion of G_γ^{(d)}(θ).
fn gamma_coefficient(d: usize, q: usize, theta: f64) -> f64 {
    let pi2 = PI * PI;
    let half = 0.5 * theta;
    let s2 = half.sin().powi(2);
    let c2 = half.cos().powi(2);
    match (d, q) {
        (2, 0) => -(s2.ln() + 1.0) / (4.0 * PI),
        (2, 1) => (-6.0 * dilog(c2) + pi2 - 6.0) / (24.0 * PI),
        (2, _) => {
            (-12.0 * trilog(s2) - 6.0 * dilog(c2) + 6.0 * s2.ln() * dilog(s2) + 12.0 * ZETA3 + pi2 - 12.0)
                / (24.0 * PI)
        }
        (3, 0) => (2.0 * (PI - theta) / theta.tan() - 1.0) / (8.0 * pi2),
        (3, 1) => -(6.0 * theta * theta - 12.0 * PI * theta + 4.0 * pi2 + 3.0) / (96.0 * pi2),
        (3, _) => {
            (-3.0 * (theta * theta + 1.0) + 6.0 * PI * theta
                + 2.0 * (theta - 2.0 * PI) * (theta - PI) * theta / theta.tan()
                - 2.0 * pi2)
                / (192.0 * pi2)
        }
        (_, 0) => {
            let c = theta.cos();
            let ls = half.sin().ln();
            (-7.0 * c - 6.0 * (c - 1.0) * ls + 4.0) / (24.0 * pi2 * (c - 1.0))
        }
        (_, 1) => {
            let c = theta.cos();
            let ls = half.sin().ln();
            ((3.0 * pi2 - 2.0) * (c + 1.0) + 36.0 * (2.0 * c + 1.0) * ls - 18.0 * (c + 1.0) * dilog(c2))
                / (432.0 * pi2 * (c + 1.0))
        }
        _ => {
            let c = theta.cos();
            let ls = half.sin().ln();
            (9.0 * pi2 / s2 + 144.0 * ls - 72.0 * ls / (c + 1.0) - 216.0 * trilog(s2)
                + 36.0 * (3.0 / (c - 1.0) + 5.0) * dilog(c2)
                + 216.0 * ls * dilog(s2)
                + 216.0 * ZETA3
                - 30.0 * pi2
                - 8.0)
                / (7776.0 * pi2)
        }
    }
}
