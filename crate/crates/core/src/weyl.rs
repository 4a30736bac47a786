//! Weyl asymptotics and the hybrid sum-rule estimator.
//!
//! To leading order the counting function of −Δψ = EΣψ on S^d is
//! N(Λ) = K Λ^{d/2} with K = ∫Σ^{d/2} / ((4π)^{d/2} Γ(1 + d/2)), so the levels
//! behave as E_n ≈ A n^{2/d} with A = K^{−2/d}. The hybrid estimator adds the
//! lowest Rayleigh–Ritz eigenvalues to a Weyl tail A^{−p} ζ_H(2p/d, M + 1).

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::density::{positivity_bound, DensitySpec};
use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;
use crate::rayleigh_ritz::{basis_size, partial_sum, spectrum};
use crate::special::{gamma, sphere_volume, BERNOULLI_EVEN};
use crate::sumrules::{degree_series_from, eigenvalue_jet, p_min, Estimate, Provenance, SumRuleResult};

/// ₂F₁(a, b; c; z) from the Euler integral, for c > b > 0 and z < 1.
///
/// With t = sin²u the integral becomes
/// 2∫₀^{π/2} sin^{2b−1}u cos^{2c−2b−1}u (1 − z sin²u)^{−a} du, which is smooth
/// for the parameters used here.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(c > b && b > 0.0) {
        return Err(Error::Domain(format!("hyp2f1 needs c > b > 0, got b={b}, c={c}")));
    }
    if !(z < 1.0) || !z.is_finite() {
        return Err(Error::Domain(format!("hyp2f1 needs z < 1, got {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let integrand = |u: f64| {
        let (s, co) = u.sin_cos();
        2.0 * s.powf(2.0 * b - 1.0) * co.powf(2.0 * c - 2.0 * b - 1.0) * (1.0 - z * s * s).powf(-a)
    };
    let integral = integrate_adaptive(&integrand, 0.0, 0.5 * PI, 1e-14)?;
    Ok(gamma(c) / (gamma(b) * gamma(c - b)) * integral)
}

/// ζ_H(s, a) = Σ_{n≥0} (n + a)^{−s}.
pub fn hurwitz_zeta(s: f64, a: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::Domain(format!("Hurwitz zeta needs s > 1, got {s}")));
    }
    if !(a > 0.0) {
        return Err(Error::Domain(format!("Hurwitz zeta needs a > 0, got {a}")));
    }
    const DIRECT: usize = 50;
    let direct: f64 = (0..DIRECT).map(|n| (n as f64 + a).powf(-s)).sum();
    let x = a + DIRECT as f64;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // B_{2k}/(2k)! · (−f^{(2k−1)}(x)) with f = x^{−s}
    let mut rising = s; // s(s+1)⋯(s+2k−2)
    let mut fact = 2.0; // (2k)!
    let mut power = x.powf(-s - 1.0);
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * rising * power;
        tail += term;
        if term.abs() < 1e-17 * tail.abs() {
            break;
        }
        let k2 = 2.0 * (k as f64 + 1.0);
        rising *= (s + k2 - 1.0) * (s + k2);
        fact *= (k2 + 1.0) * (k2 + 2.0);
        power /= x * x;
    }
    Ok(direct + tail)
}

/// ∫_{S^d} Σ^{d/2} for a zonal density, by adaptive quadrature in θ₁.
pub fn sigma_power_integral(density: &DensitySpec) -> Result<f64> {
    if !density.is_zonal() {
        return Err(Error::Unsupported("Weyl constant is implemented for zonal densities".into()));
    }
    let d = density.d;
    let half = d as f64 / 2.0;
    let f = |t: f64| density.zonal_profile(t).max(0.0).powf(half) * t.sin().powi(d as i32 - 1);
    let shell = if d == 2 { 2.0 * PI } else { sphere_volume(d - 1) };
    Ok(shell * integrate_adaptive(&f, 0.0, PI, 1e-15)?)
}

/// A = K^{−2/d} for a given ∫Σ^{d/2}.
pub fn weyl_prefactor(d: usize, sigma_integral: f64) -> f64 {
    let df = d as f64;
    let k = sigma_integral / ((4.0 * PI).powf(df / 2.0) * gamma(1.0 + df / 2.0));
    k.powf(-2.0 / df)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylModel {
    pub d: usize,
    pub kappa: f64,
    /// A in E_n ≈ A n^{2/d}, from the explicit level formulas.
    pub prefactor: f64,
    /// ∫Σ^{d/2}, by quadrature.
    pub sigma_integral: f64,
    /// A reconstructed from `sigma_integral`.
    pub prefactor_quadrature: f64,
}

impl WeylModel {
    pub fn level(&self, n: f64) -> f64 {
        self.prefactor * n.powf(2.0 / self.d as f64)
    }

    /// N(Λ) = (Λ/A)^{d/2}.
    pub fn count(&self, lambda: f64) -> f64 {
        (lambda / self.prefactor).powf(self.d as f64 / 2.0)
    }

    /// Σ_{n ≥ from} 1/E_nᵖ.
    pub fn tail(&self, p: usize, from: f64) -> Result<f64> {
        Ok(self.prefactor.powi(-(p as i32)) * hurwitz_zeta(2.0 * p as f64 / self.d as f64, from)?)
    }
}

/// F₃(κ) = ₂F₁(−3/2, 3/2; 3; 2√2κ/(√2κ + π)).
pub fn f3(kappa: f64) -> Result<f64> {
    hyp2f1(-1.5, 1.5, 3.0, 2.0 * SQRT_2 * kappa / (SQRT_2 * kappa + PI))
}

/// F₅(κ) = ₂F₁(−5/2, 5/2; 5; 2√6κ/(π^{3/2} + √6κ)).
pub fn f5(kappa: f64) -> Result<f64> {
    let s6 = 6f64.sqrt();
    hyp2f1(-2.5, 2.5, 5.0, 2.0 * s6 * kappa / (PI.powf(1.5) + s6 * kappa))
}

/// Level formulas for Σ = 1 + κY_{1,0⃗} on S³, S⁴, S⁵.
pub fn weyl_model(d: usize, kappa: f64) -> Result<WeylModel> {
    if !(3..=5).contains(&d) {
        return Err(Error::Unsupported(format!("explicit level formulas exist for d = 3, 4, 5, not {d}")));
    }
    let bound = positivity_bound(d);
    if !kappa.is_finite() || kappa.abs() >= bound {
        return Err(Error::PositivityViolated { kappa: kappa.abs(), bound });
    }
    let prefactor = match d {
        3 => {
            let cubic = 4.0 * kappa.powi(3) + 6.0 * SQRT_2 * PI * kappa * kappa + 6.0 * PI * PI * kappa
                + SQRT_2 * PI.powi(3);
            let f = f3(kappa)?;
            if !(cubic > 0.0 && f > 0.0) {
                return Err(Error::Domain(format!("level formula for d=3 is undefined at kappa={kappa}")));
            }
            2f64.powf(1.0 / 6.0) * 3f64.powf(2.0 / 3.0) * PI / (cubic.cbrt() * f.powf(2.0 / 3.0))
        }
        4 => 4.0 * 6f64.sqrt() * PI / (3.0 * kappa * kappa + 8.0 * PI * PI).sqrt(),
        _ => {
            let base = PI.powf(1.5) + 6f64.sqrt() * kappa;
            let f = f5(kappa)?;
            if !(base > 0.0 && f > 0.0) {
                return Err(Error::Domain(format!("level formula for d=5 is undefined at kappa={kappa}")));
            }
            60f64.powf(0.4) * PI.powf(1.5) / (base * f.powf(0.4))
        }
    };
    let sigma_integral = sigma_power_integral(&DensitySpec::linear(d, kappa)?)?;
    Ok(WeylModel { d, kappa, prefactor, sigma_integral, prefactor_quadrature: weyl_prefactor(d, sigma_integral) })
}

/// Weyl model for any zonal density, with A from quadrature alone.
pub fn weyl_model_for(density: &DensitySpec) -> Result<WeylModel> {
    if let (Some(k), true) = (density.zonal_kappa, (3..=5).contains(&density.d)) {
        return weyl_model(density.d, k);
    }
    let sigma_integral = sigma_power_integral(density)?;
    let a = weyl_prefactor(density.d, sigma_integral);
    Ok(WeylModel {
        d: density.d,
        kappa: density.zonal_kappa.unwrap_or(f64::NAN),
        prefactor: a,
        sigma_integral,
        prefactor_quadrature: a,
    })
}

/// Lowest ⌊retain·N̄⌋ Rayleigh–Ritz levels plus the Weyl tail beyond them.
pub fn hybrid_sum_rule(d: usize, p: usize, density: &DensitySpec, ell_max: usize, retain: f64) -> Result<SumRuleResult> {
    if p < p_min(d) {
        return Err(Error::DivergentSumRule { d, p });
    }
    if density.d != d {
        return Err(Error::MixedDimensions(d, density.d));
    }
    if !(retain > 0.0 && retain <= 1.0) {
        return Err(Error::Domain(format!("retain fraction {retain} must lie in (0, 1]")));
    }
    let model = weyl_model_for(density)?;
    let spec = spectrum(d, ell_max, density)?;
    let m = spec.retained_for(retain).min(spec.total_count() - 1);
    let low = partial_sum(&spec, p, m)?;
    let tail = model.tail(p, m as f64 + 1.0)?;
    // no rigorous bound exists for the Weyl tail
    let est = Estimate { value: low + tail, trunc_error: f64::NAN };
    Ok(SumRuleResult::new(d, p, density, est, Provenance::Hybrid, ell_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaSample {
    pub d: usize,
    pub s: usize,
    pub ell_max: usize,
    pub exact_tail: f64,
    pub weyl_tail: f64,
    pub delta: f64,
}

/// |Σ_{ℓ>ℓ_max} g_ℓ/λ_ℓˢ − Σ_{n≥N̄} 1/E_nˢ| for the uniform sphere.
pub fn delta(d: usize, ell_max: usize, s: usize) -> Result<DeltaSample> {
    if d < 2 {
        return Err(Error::Domain(format!("sphere dimension must be at least 2, got {d}")));
    }
    if s < p_min(d) {
        return Err(Error::DivergentSumRule { d, p: s });
    }
    let exact_tail = degree_series_from(d, ell_max + 1, |x| eigenvalue_jet(d, x).powi(-(s as i32)))?;
    let a = weyl_prefactor(d, sphere_volume(d));
    let n_bar = basis_size(d, ell_max) as f64;
    let weyl_tail = a.powi(-(s as i32)) * hurwitz_zeta(2.0 * s as f64 / d as f64, n_bar)?;
    Ok(DeltaSample { d, s, ell_max, exact_tail, weyl_tail, delta: (exact_tail - weyl_tail).abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Root-mean-square residual of log Δ.
    pub residual: f64,
    pub n_samples: usize,
    pub iterations: usize,
    /// Condition number of the Gauss–Newton normal matrix at the solution.
    pub condition: f64,
    /// Largest absolute correlation between fitted parameters.
    pub max_correlation: f64,
    pub ill_conditioned: bool,
}

impl DeltaFit {
    pub fn eval(&self, ell: f64) -> f64 {
        self.a / (1.0 + self.b * ell * ell).powf(self.c)
    }
}

/// The fit quoted for Δ(5, ℓ_max, 3).
pub fn reference_delta_fit(ell_max: f64) -> f64 {
    0.0145028 / (1.0 + 0.0409641 * ell_max * ell_max).powf(0.477369)
}

fn log_residuals(theta: &[f64; 3], ells: &[f64], logs: &[f64]) -> DVector<f64> {
    let (la, b, c) = (theta[0], theta[1].exp(), theta[2]);
    DVector::from_iterator(
        ells.len(),
        ells.iter().zip(logs).map(|(&l, &y)| la - c * (1.0 + b * l * l).ln() - y),
    )
}

fn jacobian(theta: &[f64; 3], ells: &[f64]) -> DMatrix<f64> {
    let (b, c) = (theta[1].exp(), theta[2]);
    DMatrix::from_fn(ells.len(), 3, |i, k| {
        let bl2 = b * ells[i] * ells[i];
        match k {
            0 => 1.0,
            1 => -c * bl2 / (1.0 + bl2),
            _ => -(1.0 + bl2).ln(),
        }
    })
}

/// Least-squares fit of log Δ to log[a/(1 + bℓ²)^c] by Gauss–Newton with backtracking.
pub fn fit_delta(samples: &[DeltaSample]) -> Result<DeltaFit> {
    if samples.len() < 5 {
        return Err(Error::Domain(format!("the fit needs at least 5 samples, got {}", samples.len())));
    }
    if samples.iter().any(|s| !(s.delta > 0.0)) {
        return Err(Error::Domain("every sample must have a positive delta".into()));
    }
    let ells: Vec<f64> = samples.iter().map(|s| s.ell_max as f64).collect();
    let logs: Vec<f64> = samples.iter().map(|s| s.delta.ln()).collect();
    let a0 = samples[0].delta;
    let c0 = 0.5;
    let last = samples.last().unwrap();
    let l_last = last.ell_max as f64;
    let b0 = ((a0 / last.delta).powf(1.0 / c0) - 1.0) / (l_last * l_last).max(1.0);
    let b0 = if b0 > 0.0 && b0.is_finite() { b0 } else { 1e-3 };
    let mut theta = [a0.ln(), b0.ln(), c0];
    let cost = |t: &[f64; 3]| log_residuals(t, &ells, &logs).norm_squared();
    let mut current = cost(&theta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 200 {
        iterations += 1;
        let r = log_residuals(&theta, &ells, &logs);
        let j = jacobian(&theta, &ells);
        let step = j
            .clone()
            .svd(true, true)
            .solve(&(-r), 1e-15)
            .map_err(|e| Error::NoConvergence(format!("Gauss-Newton step: {e}")))?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = [theta[0] + scale * step[0], theta[1] + scale * step[1], theta[2] + scale * step[2]];
            let c = cost(&trial);
            if c.is_finite() && c <= current {
                let gain = current - c;
                theta = trial;
                current = c;
                accepted = true;
                if gain <= 1e-15 * (1.0 + current) && step.norm() * scale < 1e-10 {
                    converged = true;
                }
                break;
            }
            scale *= 0.5;
        }
        if !accepted || step.norm() < 1e-12 * (1.0 + theta.iter().map(|v| v.abs()).sum::<f64>()) {
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("delta fit did not converge in 200 iterations".into()));
    }
    let j = jacobian(&theta, &ells);
    let normal = j.transpose() * &j;
    let sv = normal.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    let max_correlation = match normal.try_inverse() {
        Some(cov) => {
            let mut m: f64 = 0.0;
            for i in 0..3 {
                for k in (i + 1)..3 {
                    m = m.max((cov[(i, k)] / (cov[(i, i)] * cov[(k, k)]).sqrt()).abs());
                }
            }
            m
        }
        None => 1.0,
    };
    Ok(DeltaFit {
        a: theta[0].exp(),
        b: theta[1].exp(),
        c: theta[2],
        residual: (current / ells.len() as f64).sqrt(),
        n_samples: ells.len(),
        iterations,
        condition,
        max_correlation,
        ill_conditioned: max_correlation > 0.999 || condition > 1e12,
    })
}
