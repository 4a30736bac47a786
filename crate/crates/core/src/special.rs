//! Special functions that the rest of the crate leans on: Γ wrappers,
//! the dilogarithm and trilogarithm on [0, 1], and a few constants.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Apéry's constant ζ(3).
pub const ZETA3: f64 = 1.202_056_903_159_594_3;

/// ζ(2) = π²/6.
pub const ZETA2: f64 = PI * PI / 6.0;

/// Even-index Bernoulli numbers B₂, B₄, …, B₂₀.
pub const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Volume (surface area) of the unit d-sphere, 2π^{(d+1)/2}/Γ((d+1)/2).
pub fn sphere_volume(d: usize) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// ∫₋₁¹ (1−x²)^α dx = √π Γ(α+1)/Γ(α+3/2).
pub fn jacobi_mass(alpha: f64) -> f64 {
    (0.5 * PI.ln() + ln_gamma(alpha + 1.0) - ln_gamma(alpha + 1.5)).exp()
}

const POLYLOG_TOL: f64 = 1e-17;

fn li_series(s: i32, z: f64) -> f64 {
    let mut term = z;
    let mut sum = 0.0_f64;
    let mut k = 1.0_f64;
    while term.abs() > POLYLOG_TOL * sum.abs().max(1e-300) || k < 2.0 {
        sum += term / k.powi(s);
        k += 1.0;
        term *= z;
        if k > 200.0 {
            break;
        }
    }
    sum
}

/// Dilogarithm Li₂(z) for z ∈ [0, 1].
pub fn dilog(z: f64) -> f64 {
    assert!((0.0..=1.0).contains(&z), "dilog argument {z} outside [0,1]");
    if z == 0.0 {
        return 0.0;
    }
    if z == 1.0 {
        return ZETA2;
    }
    if z <= 0.5 {
        li_series(2, z)
    } else {
        ZETA2 - z.ln() * (1.0 - z).ln() - li_series(2, 1.0 - z)
    }
}

/// Trilogarithm Li₃(z) for z ∈ [0, 1].
///
/// Power series for z ≤ 1/2; above that the expansion in μ = ln z,
/// Li₃(e^μ) = ζ(3) + ζ(2)μ + (3/2 − ln(−μ))μ²/2 + Σ_{k≥3} ζ(3−k) μ^k/k!,
/// which converges for |μ| < 2π.
pub fn trilog(z: f64) -> f64 {
    assert!((0.0..=1.0).contains(&z), "trilog argument {z} outside [0,1]");
    if z == 0.0 {
        return 0.0;
    }
    if z == 1.0 {
        return ZETA3;
    }
    if z <= 0.5 {
        return li_series(3, z);
    }
    let mu = z.ln();
    let mut sum = ZETA3 + ZETA2 * mu + (1.5 - (-mu).ln()) * mu * mu / 2.0;
    // ζ(3−k) for k ≥ 3: ζ(0) = −1/2, ζ(−n) = −B_{n+1}/(n+1), zero for even n > 0.
    let mut mupow = mu * mu * mu;
    let mut fact = 6.0;
    let mut k = 3usize;
    loop {
        let n = k - 3;
        let zeta_neg = if n == 0 {
            -0.5
        } else if n.is_multiple_of(2) {
            0.0
        } else {
            let idx = n.div_ceil(2) - 1;
            if idx >= BERNOULLI_EVEN.len() {
                break;
            }
            -BERNOULLI_EVEN[idx] / (n as f64 + 1.0)
        };
        let term = zeta_neg * mupow / fact;
        sum += term;
        if n > 0 && n % 2 == 1 && term.abs() < 1e-18 {
            break;
        }
        k += 1;
        mupow *= mu;
        fact *= k as f64;
    }
    sum
}
