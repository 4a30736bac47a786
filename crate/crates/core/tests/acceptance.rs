//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use sphere_sumrules::density::DensitySpec;
use sphere_sumrules::greens::{green_closed_form, green_spectral, GreenOrder};
use sphere_sumrules::harmonics::{degeneracy, eigenvalue, HarmonicIndex};
use sphere_sumrules::rayleigh_ritz::{assemble, basis_size, solve_spectrum, AssemblyMode, SpectrumEstimate};
use sphere_sumrules::special::ZETA3;
use sphere_sumrules::sumrules::{
    closed_form_reference, sum_rule, sum_rule_shifted, zeta_uniform, Engine, IntegralKind,
};
use sphere_sumrules::weyl::{delta, fit_delta, hybrid_sum_rule, reference_delta_fit, DeltaSample};

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within_time(elapsed: Duration, limit: Duration, what: &str) -> Option<String> {
    (elapsed > limit).then(|| format!("{what} took {elapsed:?}, over the {limit:?} limit"))
}

fn zeta_values() -> Outcome {
    let start = Instant::now();
    let cases = [
        (2, 2, 1.0),
        (3, 2, 1.0 / 16.0 + PI * PI / 12.0),
        (4, 3, 2.0 * ZETA3 / 27.0 + 23.0 / 1458.0),
        (5, 3, 5.0 / 6144.0 + 19.0 * PI * PI / 2304.0),
    ];
    let mut worst: f64 = 0.0;
    for (d, p, exact) in cases {
        worst = worst.max((zeta_uniform(d, p).unwrap() - exact).abs());
    }
    let late = within_time(start.elapsed(), Duration::from_secs(1), "zeta evaluation");
    check(
        worst <= 1e-10 && late.is_none(),
        format!("max |error| = {worst:.2e} (limit 1e-10), {:?}{}", start.elapsed(), late.map_or(String::new(), |s| format!("; {s}"))),
    )
}

/// Table of κ-polynomials for the I and J functionals.
fn table_cell(kind: IntegralKind, d: usize, k: f64) -> Option<f64> {
    let k2 = k * k;
    let k4 = k2 * k2;
    let pi2 = PI * PI;
    let df = d as f64;
    Some(match kind {
        IntegralKind::I1(0) => k2 / df,
        IntegralKind::I2(0, 0) => k2 / (df * df),
        IntegralKind::I3(0, 0, 0) => match d {
            2 => k2 / 8.0 + k4 / (120.0 * PI),
            3 => k2 / 27.0 + k4 / (144.0 * pi2),
            4 => k2 / 64.0 + 3.0 * k4 / (1120.0 * pi2),
            _ => k4 / (240.0 * PI.powi(3)) + k2 / 125.0,
        },
        IntegralKind::J1(0, 0) => match d {
            2 => 1.0 + k2 / (8.0 * PI),
            3 => (3.0 + 4.0 * pi2) / 48.0 + 11.0 * k2 / (36.0 * pi2),
            _ => return None,
        },
        IntegralKind::J2(0, 0, 0) => match d {
            2 => 2.0 * (ZETA3 - 1.0) + 3.0 * k2 / (32.0 * PI),
            3 => (2.0 * pi2 - 3.0) / 96.0 + (4.0 * pi2 - 29.0) * k2 / (96.0 * pi2),
            4 => 277.0 * k2 / (4608.0 * pi2) + 2.0 * ZETA3 / 27.0 + 23.0 / 1458.0,
            _ => (2833.0 / (96000.0 * PI.powi(3)) + 1.0 / (80.0 * PI)) * k2 + (15.0 + 152.0 * pi2) / 18432.0,
        },
        _ => return None,
    })
}

fn table_one() -> Outcome {
    let start = Instant::now();
    let kinds = [
        IntegralKind::I1(0),
        IntegralKind::I2(0, 0),
        IntegralKind::I3(0, 0, 0),
        IntegralKind::J1(0, 0),
        IntegralKind::J2(0, 0, 0),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_cell = String::new();
    let mut cells = 0;
    for d in 2..=5 {
        for &k in &[0.5, 1.0, 2.0] {
            let engine = Engine::new(&DensitySpec::linear(d, k).unwrap(), 200).unwrap();
            for &kind in &kinds {
                let Some(expected) = table_cell(kind, d, k) else { continue };
                let got = engine.integral(kind).unwrap().value;
                let rel = ((got - expected) / expected).abs();
                cells += 1;
                if rel > worst {
                    worst = rel;
                    worst_cell = format!("{kind} d={d} kappa={k}");
                }
            }
        }
    }
    let late = within_time(start.elapsed(), Duration::from_secs(60), "table");
    check(
        worst <= 1e-6 && late.is_none(),
        format!("{cells} cells, max relative error {worst:.2e} at {worst_cell} (limit 1e-6), {:?}", start.elapsed()),
    )
}

const CLOSED_CASES: [(usize, usize); 4] = [(3, 2), (3, 3), (4, 3), (5, 3)];

fn closed_form_sum_rules() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut zero_gap: f64 = 0.0;
    for (d, p) in CLOSED_CASES {
        for &k in &[0.0, 0.5, 1.0, 2.0] {
            let rho = DensitySpec::linear(d, k).unwrap();
            let engine = sum_rule(d, p, &rho, 200).unwrap().value;
            let closed = closed_form_reference(d, p, k).unwrap();
            worst = worst.max(((engine - closed) / closed).abs());
        }
        let z = match (d, p) {
            (3, 2) => 1.0 / 16.0 + PI * PI / 12.0,
            (3, 3) => (2.0 * PI * PI - 3.0) / 96.0,
            (4, 3) => 2.0 * ZETA3 / 27.0 + 23.0 / 1458.0,
            _ => 5.0 / 6144.0 + 19.0 * PI * PI / 2304.0,
        };
        zero_gap = zero_gap.max((closed_form_reference(d, p, 0.0).unwrap() - z).abs());
    }
    check(
        worst <= 1e-6 && zero_gap <= 1e-15,
        format!("max relative error {worst:.2e} (limit 1e-6); kappa=0 closed forms vs zetas {zero_gap:.1e}"),
    )
}

fn divergence_cancellation() -> Outcome {
    let rho = DensitySpec::linear(3, 1.0).unwrap();
    let gammas = [1e-2, 1e-3, 1e-4];
    let mut lead_gap: f64 = 0.0;
    let mut extrap_gap: f64 = 0.0;
    let mut approaching = true;
    for p in [2usize, 3] {
        let target = closed_form_reference(3, p, 1.0).unwrap();
        let runs: Vec<_> = gammas.iter().map(|&g| sum_rule_shifted(3, p, &rho, g, 200).unwrap()).collect();
        let last = runs.last().unwrap();
        lead_gap = lead_gap.max((last.z * last.gamma.powi(p as i32) - 1.0).abs());
        let errs: Vec<f64> = runs.iter().map(|r| (r.z_renorm - target).abs()).collect();
        approaching &= errs.windows(2).all(|w| w[1] < w[0]);
        let (g1, g2) = (runs[1].gamma, runs[2].gamma);
        let (z1, z2) = (runs[1].z_renorm, runs[2].z_renorm);
        let limit = z2 - g2 * (z1 - z2) / (g1 - g2);
        extrap_gap = extrap_gap.max((limit - target).abs());
    }
    check(
        lead_gap <= 1e-3 && extrap_gap <= 1e-6 && approaching,
        format!(
            "|gamma^p Z - 1| = {lead_gap:.2e} (limit 1e-3); linear extrapolation off by {extrap_gap:.2e} (limit 1e-6); monotone approach {approaching}"
        ),
    )
}

fn random_zonal(rng: &mut StdRng) -> DensitySpec {
    let d = rng.random_range(3..=5);
    loop {
        let mut coeffs = BTreeMap::new();
        for l in 1..=3 {
            coeffs.insert(HarmonicIndex::zonal(d, l), Complex64::new(rng.random_range(-0.6..0.6), 0.0));
        }
        if let Ok(rho) = DensitySpec::from_coeffs(d, coeffs) {
            return rho;
        }
    }
}

fn perturbation_theory() -> Outcome {
    let start = Instant::now();
    let mut densities = Vec::new();
    for d in 3..=5 {
        for &k in &[0.5, 1.0] {
            densities.push(DensitySpec::linear(d, k).unwrap());
        }
    }
    let mut rng = StdRng::seed_from_u64(20_240_611);
    for _ in 0..5 {
        densities.push(random_zonal(&mut rng));
    }
    let mut worst: f64 = 0.0;
    for rho in &densities {
        let engine = Engine::new(rho, 4 * rho.max_ell() + 4).unwrap();
        let closed = engine.epsilon();
        for k in 1..=4 {
            let r = engine.epsilon_recursive(k).unwrap();
            worst = worst.max((r - closed.eps[k - 1]).abs());
        }
    }
    let late = within_time(start.elapsed(), Duration::from_secs(60), "epsilon checks");
    check(
        worst <= 1e-10 && late.is_none(),
        format!("{} densities, max |recursive - closed| = {worst:.2e} (limit 1e-10), {:?}", densities.len(), start.elapsed()),
    )
}

fn expanded(s: &SpectrumEstimate) -> Vec<f64> {
    s.levels.iter().flat_map(|l| std::iter::repeat_n(l.value, l.multiplicity as usize)).collect()
}

fn rayleigh_ritz_integrity() -> Outcome {
    let counts = [(2, 90, 8281u128), (3, 30, 10416), (4, 20, 19481), (5, 15, 27132), (3, 90, 255346)];
    let counts_ok = counts.iter().all(|&(d, l, n)| basis_size(d, l) == n);
    let rho = DensitySpec::linear(3, 1.0).unwrap();
    let full = expanded(&solve_spectrum(&assemble(3, 6, &rho, AssemblyMode::Full).unwrap()).unwrap());
    let zonal = expanded(&solve_spectrum(&assemble(3, 6, &rho, AssemblyMode::ZonalBlocks).unwrap()).unwrap());
    let agree = if full.len() == zonal.len() {
        full.iter().zip(&zonal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let mut uniform_gap: f64 = 0.0;
    for d in 2..=5 {
        let s = expanded(
            &solve_spectrum(&assemble(d, 6, &DensitySpec::uniform(d).unwrap(), AssemblyMode::ZonalBlocks).unwrap())
                .unwrap(),
        );
        let exact: Vec<f64> = (0..=6)
            .flat_map(|l| std::iter::repeat_n(eigenvalue(d, l), degeneracy(d, l) as usize))
            .collect();
        uniform_gap = if s.len() == exact.len() {
            uniform_gap.max(s.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        } else {
            f64::INFINITY
        };
    }
    check(
        counts_ok && agree <= 1e-10 && uniform_gap <= 1e-12,
        format!("basis counts exact: {counts_ok}; block vs full {agree:.2e} (limit 1e-10); kappa=0 spectra off by {uniform_gap:.1e}"),
    )
}

fn hybrid_estimates() -> Outcome {
    let start = Instant::now();
    let mut worst3: f64 = 0.0;
    let mut d3_err = BTreeMap::new();
    for i in 0..=8 {
        let k = 0.25 * i as f64;
        let h = hybrid_sum_rule(3, 3, &DensitySpec::linear(3, k).unwrap(), 30, 0.5).unwrap().value;
        let err = (h - closed_form_reference(3, 3, k).unwrap()).abs();
        worst3 = worst3.max(err);
        d3_err.insert(i, err);
    }
    // at κ = 0 the retained eigenvalues are exact, so the error is the tail mismatch
    let m = basis_size(3, 30) / 2;
    let mut exact_levels = Vec::new();
    let mut ell = 1;
    while (exact_levels.len() as u128) < m {
        exact_levels.extend(std::iter::repeat_n(eigenvalue(3, ell), degeneracy(3, ell) as usize));
        ell += 1;
    }
    exact_levels.truncate(m as usize);
    let zeta = (2.0 * PI * PI - 3.0) / 96.0;
    let exact_tail = zeta - exact_levels.iter().map(|e| e.powi(-3)).sum::<f64>();
    // E_n ≈ 3^{2/3} n^{2/3}, so the Weyl tail is ζ(2, M+1)/9
    let weyl_tail = (PI * PI / 6.0 - (1..=m).map(|n| 1.0 / (n as f64).powi(2)).sum::<f64>()) / 9.0;
    let identity_gap = (d3_err[&0] - (exact_tail - weyl_tail).abs()).abs();
    let mut ordering = true;
    let mut pairs = Vec::new();
    for &(i, k) in &[(0usize, 0.0), (4, 1.0), (8, 2.0)] {
        let h = hybrid_sum_rule(5, 3, &DensitySpec::linear(5, k).unwrap(), 15, 0.5).unwrap().value;
        let e5 = (h - closed_form_reference(5, 3, k).unwrap()).abs();
        ordering &= e5 > d3_err[&i];
        pairs.push(format!("k={k}: {e5:.1e} vs {:.1e}", d3_err[&i]));
    }
    let late = within_time(start.elapsed(), Duration::from_secs(300), "hybrid runs");
    check(
        worst3 <= 2e-3 && identity_gap <= 1e-12 && ordering && late.is_none(),
        format!(
            "d=3 max error {worst3:.2e} (limit 2e-3); kappa=0 identity gap {identity_gap:.1e} (limit 1e-12); d=5 error exceeds d=3 [{}]: {ordering}; {:?}",
            pairs.join(", "),
            start.elapsed()
        ),
    )
}

fn delta_fit() -> Outcome {
    let samples: Vec<DeltaSample> = (10..=60).map(|l| delta(5, l, 3).unwrap()).collect();
    let decreasing = samples.windows(2).all(|w| w[1].delta < w[0].delta);
    let worst_ratio = samples
        .iter()
        .map(|s| (s.delta / reference_delta_fit(s.ell_max as f64) - 1.0).abs())
        .fold(0.0, f64::max);
    let tail_ratio = samples
        .iter()
        .map(|s| (s.exact_tail / reference_delta_fit(s.ell_max as f64) - 1.0).abs())
        .fold(0.0, f64::max);
    let fit = fit_delta(&samples).unwrap();
    let exponent_ok = (0.38..=0.57).contains(&fit.c);
    let far = reference_delta_fit(1e5);
    let far_ok = far > 5e-7 && far < 2e-6;
    check(
        worst_ratio <= 0.2 && exponent_ok && decreasing && far_ok,
        format!(
            "pointwise deviation from the quoted fit up to {:.1}% (limit 20%); refit c = {:.3} (want 0.38..0.57); decreasing: {decreasing}; quoted fit at l=1e5 = {far:.2e}; exact tail alone deviates from the quoted fit by at most {:.1}%",
            100.0 * worst_ratio,
            fit.c,
            100.0 * tail_ratio
        ),
    )
}

fn green_cross_validation() -> Outcome {
    let start = Instant::now();
    let mut worst_bound: f64 = 0.0;
    let mut all_within = true;
    let mut worst_excess: f64 = 0.0;
    for &(d, q) in &[(2usize, 1usize), (2, 2), (3, 1), (3, 2), (4, 2)] {
        let order = GreenOrder::unshifted(d, q).unwrap();
        for &t in &[PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
            let s = green_spectral(&order, t.cos(), 200_000).unwrap();
            let c = green_closed_form(d, q, t).unwrap();
            worst_bound = worst_bound.max(s.tail_bound);
            let diff = (s.value - c).abs();
            all_within &= diff <= s.tail_bound.max(1e-14);
            worst_excess = worst_excess.max(diff - s.tail_bound);
        }
    }
    let late = within_time(start.elapsed(), Duration::from_secs(60), "Green's functions");
    check(
        all_within && worst_bound <= 1e-6 && late.is_none(),
        format!(
            "all within tail bounds: {all_within} (max excess {worst_excess:.1e}); largest tail bound {worst_bound:.2e} (limit 1e-6); {:?}",
            start.elapsed()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("uniform-density zeta values", zeta_values),
        ("table of I and J functionals", table_one),
        ("closed-form sum rules", closed_form_sum_rules),
        ("divergence cancellation", divergence_cancellation),
        ("perturbation theory", perturbation_theory),
        ("Rayleigh-Ritz integrity", rayleigh_ritz_integrity),
        ("hybrid estimate", hybrid_estimates),
        ("delta fit", delta_fit),
        ("Green's function cross-validation", green_cross_validation),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        let tag = if out.passed { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {name}: {}", i + 1, out.detail);
        if !out.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
