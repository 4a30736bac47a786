//! Cross-module invariant suite with per-check residuals.

use std::f64::consts::PI;

use serde::Serialize;

use crate::density::DensitySpec;
use crate::error::{Error, Result};
use crate::greens::{green_closed_form, green_spectral, GreenOrder};
use crate::harmonics::{
    addition_eval, coupling_w, eval_harmonic, indices_of_degree, HarmonicIndex, ZonalCouplings,
};
use crate::quadrature::gauss_jacobi;
use crate::rayleigh_ritz::{assemble, solve_spectrum, AssemblyMode};
use crate::special::{sphere_volume, ZETA2};
use crate::sumrules::{closed_form_reference, sum_rule, sum_rule_shifted, zeta_uniform, Engine};
use crate::weyl::{hurwitz_zeta, weyl_model};

pub const MODULES: [&str; 5] = ["harmonics", "greens", "sumrules", "rayleigh_ritz", "weyl"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Check {
    module: &'static str,
    name: &'static str,
    tolerance: f64,
    run: fn() -> Result<f64>,
}

fn gegenbauer_orthonormality() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &lambda in &[0.5, 1.0, 2.5] {
        let rule = gauss_jacobi(lambda - 0.5, 30)?;
        let mut buf = Vec::new();
        let mut gram = vec![vec![0.0; 12]; 12];
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            crate::quadrature::orthonormal_values(lambda - 0.5, 11, x, &mut buf);
            for i in 0..12 {
                for j in 0..12 {
                    gram[i][j] += w * buf[i] * buf[j];
                }
            }
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    Ok(worst)
}

fn addition_theorem() -> Result<f64> {
    let omega = [0.4, 1.3, 2.9];
    let other = [1.1, 0.7, -0.8];
    let cosang = {
        let unit = |w: &[f64; 3]| {
            let (s1, c1) = w[0].sin_cos();
            let (s2, c2) = w[1].sin_cos();
            let (s3, c3) = w[2].sin_cos();
            [c1, s1 * c2, s1 * s2 * c3, s1 * s2 * s3]
        };
        let (a, b) = (unit(&omega), unit(&other));
        a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
    };
    let mut worst: f64 = 0.0;
    for ell in 0..=4 {
        let sum: f64 = indices_of_degree(3, ell)
            .iter()
            .map(|i| (eval_harmonic(i, &omega).unwrap() * eval_harmonic(i, &other).unwrap().conj()).re)
            .sum();
        worst = worst.max((sum - addition_eval(3, ell, cosang)?).abs());
    }
    Ok(worst)
}

fn zonal_couplings_agree() -> Result<f64> {
    let zc = ZonalCouplings::new(4, 5, 2)?;
    let mut worst: f64 = 0.0;
    for m2 in 0..=2usize {
        let block = zc.block(m2);
        let m = vec![m2 as i64, 0, 0];
        for (a, row) in block.iter().enumerate() {
            for (b, ws) in row.iter().enumerate() {
                for (big_l, &w) in ws.iter().enumerate() {
                    let direct = coupling_w(
                        &HarmonicIndex::new(4, m2 + a, m.clone())?,
                        &HarmonicIndex::new(4, m2 + b, m.clone())?,
                        &HarmonicIndex::zonal(4, big_l),
                    )?;
                    worst = worst.max((w - direct).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn green_closed_vs_spectral() -> Result<f64> {
    let order = GreenOrder::unshifted(3, 1)?;
    let mut worst: f64 = 0.0;
    for &t in &[PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
        let s = green_spectral(&order, t.cos(), 100_000)?;
        let c = green_closed_form(3, 1, t)?;
        worst = worst.max((s.value - c).abs() - s.tail_bound).max(0.0);
    }
    Ok(worst)
}

fn green_coincidence() -> Result<f64> {
    let order = GreenOrder::unshifted(3, 1)?;
    let s = green_spectral(&order, 1.0, 100_000)?;
    let z = zeta_uniform(3, 2)? / sphere_volume(3);
    Ok(((s.value - z).abs() - s.tail_bound).max(0.0))
}

fn zeta_closed_forms() -> Result<f64> {
    let pairs = [
        (zeta_uniform(2, 2)?, 1.0),
        (zeta_uniform(3, 2)?, 1.0 / 16.0 + ZETA2 / 2.0),
        (zeta_uniform(4, 3)?, 2.0 * crate::special::ZETA3 / 27.0 + 23.0 / 1458.0),
        (zeta_uniform(5, 3)?, 5.0 / 6144.0 + 19.0 * PI * PI / 2304.0),
    ];
    Ok(pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn epsilon_recursion() -> Result<f64> {
    let e = Engine::new(&DensitySpec::linear(3, 1.0)?, 12)?;
    let closed = e.epsilon();
    let mut worst: f64 = 0.0;
    for k in 1..=4 {
        worst = worst.max((e.epsilon_recursive(k)? - closed.eps[k - 1]).abs());
    }
    Ok(worst)
}

fn engine_vs_closed_form() -> Result<f64> {
    let rho = DensitySpec::linear(3, 1.0)?;
    let v = sum_rule(3, 3, &rho, 120)?.value;
    let c = closed_form_reference(3, 3, 1.0)?;
    Ok(((v - c) / c).abs())
}

fn shifted_cancellation() -> Result<f64> {
    let rho = DensitySpec::linear(3, 1.0)?;
    let (g1, g2) = (1e-3, 1e-4);
    let z1 = sum_rule_shifted(3, 2, &rho, g1, 100)?.z_renorm;
    let z2 = sum_rule_shifted(3, 2, &rho, g2, 100)?.z_renorm;
    let limit = z2 - g2 * (z1 - z2) / (g1 - g2);
    Ok((limit - closed_form_reference(3, 2, 1.0)?).abs())
}

fn block_vs_full() -> Result<f64> {
    let rho = DensitySpec::linear(3, 1.0)?;
    let expand = |mode| -> Result<Vec<f64>> {
        let s = solve_spectrum(&assemble(3, 4, &rho, mode)?)?;
        Ok(s.levels.iter().flat_map(|l| std::iter::repeat_n(l.value, l.multiplicity as usize)).collect())
    };
    let (a, b) = (expand(AssemblyMode::Full)?, expand(AssemblyMode::ZonalBlocks)?);
    if a.len() != b.len() {
        return Err(Error::Domain("block and full spectra differ in size".into()));
    }
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

fn zero_mode_exact() -> Result<f64> {
    let rho = DensitySpec::linear(3, 2.0)?;
    let s = solve_spectrum(&assemble(3, 10, &rho, AssemblyMode::ZonalBlocks)?)?;
    Ok(s.levels[s.zero_mode].value.abs())
}

fn weyl_formula_vs_quadrature() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for d in 3..=5 {
        for &k in &[0.0, 1.0, 2.0] {
            let m = weyl_model(d, k)?;
            worst = worst.max((m.prefactor / m.prefactor_quadrature - 1.0).abs());
        }
    }
    Ok(worst)
}

fn hurwitz_basel() -> Result<f64> {
    Ok((hurwitz_zeta(2.0, 1.0)? - ZETA2).abs())
}

const CHECKS: &[Check] = &[
    Check { module: "harmonics", name: "gegenbauer_orthonormality", tolerance: 1e-12, run: gegenbauer_orthonormality },
    Check { module: "harmonics", name: "addition_theorem", tolerance: 1e-12, run: addition_theorem },
    Check { module: "harmonics", name: "zonal_vs_general_couplings", tolerance: 1e-12, run: zonal_couplings_agree },
    Check { module: "greens", name: "closed_form_vs_spectral", tolerance: 1e-12, run: green_closed_vs_spectral },
    Check { module: "greens", name: "coincidence_limit", tolerance: 1e-12, run: green_coincidence },
    Check { module: "sumrules", name: "uniform_zeta_closed_forms", tolerance: 1e-10, run: zeta_closed_forms },
    Check { module: "sumrules", name: "epsilon_recursion_vs_closed", tolerance: 1e-10, run: epsilon_recursion },
    Check { module: "sumrules", name: "engine_vs_closed_form", tolerance: 1e-6, run: engine_vs_closed_form },
    Check { module: "sumrules", name: "shifted_divergence_cancellation", tolerance: 1e-6, run: shifted_cancellation },
    Check { module: "rayleigh_ritz", name: "block_vs_full_spectrum", tolerance: 1e-10, run: block_vs_full },
    Check { module: "rayleigh_ritz", name: "zero_mode_exact", tolerance: 1e-10, run: zero_mode_exact },
    Check { module: "weyl", name: "level_formula_vs_quadrature", tolerance: 1e-8, run: weyl_formula_vs_quadrature },
    Check { module: "weyl", name: "hurwitz_basel", tolerance: 1e-12, run: hurwitz_basel },
];

/// Run every check, or those of one module; `tolerance` overrides the per-check defaults.
pub fn run_suite(module: Option<&str>, tolerance: Option<f64>) -> Result<Vec<CheckOutcome>> {
    if let Some(m) = module {
        if !MODULES.contains(&m) {
            return Err(Error::Domain(format!("unknown module '{m}'; expected one of {}", MODULES.join(", "))));
        }
    }
    Ok(CHECKS
        .iter()
        .filter(|c| module.is_none_or(|m| m == c.module))
        .map(|c| {
            let tol = tolerance.unwrap_or(c.tolerance);
            match (c.run)() {
                Ok(r) => CheckOutcome {
                    module: c.module,
                    name: c.name,
                    residual: r,
                    tolerance: tol,
                    passed: r <= tol,
                    error: None,
                },
                Err(e) => CheckOutcome {
                    module: c.module,
                    name: c.name,
                    residual: f64::NAN,
                    tolerance: tol,
                    passed: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
