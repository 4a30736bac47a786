//! A density 1 + κ·(unit vector)·x is a rotation of the zonal one, so every
//! rotation-invariant quantity must agree between the general and zonal paths.

use std::collections::BTreeMap;

use num_complex::Complex64;
use sphere_sumrules::density::DensitySpec;
use sphere_sumrules::harmonics::HarmonicIndex;
use sphere_sumrules::rayleigh_ritz::{assemble, solve_spectrum, AssemblyMode};
use sphere_sumrules::sumrules::{sum_rule, Engine};

/// Σ = 1 + κ Re(e^{−iα}·…) built from the m = (1, ±1) harmonics of S³.
fn tilted(kappa: f64, alpha: f64) -> DensitySpec {
    let c = Complex64::from_polar(kappa / 2f64.sqrt(), alpha);
    let mut coeffs = BTreeMap::new();
    coeffs.insert(HarmonicIndex::new(3, 1, vec![1, 1]).unwrap(), c);
    coeffs.insert(HarmonicIndex::new(3, 1, vec![1, -1]).unwrap(), -c.conj());
    DensitySpec::from_coeffs(3, coeffs).unwrap()
}

#[test]
fn finite_functionals_are_rotation_invariant() {
    let kappa = 1.3;
    let zonal = Engine::new(&DensitySpec::linear(3, kappa).unwrap(), 4).unwrap();
    let general = Engine::new(&tilted(kappa, 0.7), 4).unwrap();
    for (a, b) in [
        (zonal.i1(0), general.i1(0)),
        (zonal.i2(0, 0), general.i2(0, 0)),
        (zonal.i2(0, 1), general.i2(0, 1)),
        (zonal.i3(0, 0, 0), general.i3(0, 0, 0)),
    ] {
        assert!((a - b).abs() < 1e-13 * a.abs().max(1.0), "{a} vs {b}");
    }
    let (ez, eg) = (zonal.epsilon(), general.epsilon());
    for k in 0..4 {
        assert!((ez.eps[k] - eg.eps[k]).abs() < 1e-12);
    }
    for k in 1..=4 {
        assert!((general.epsilon_recursive(k).unwrap() - eg.eps[k - 1]).abs() < 1e-12);
    }
}

#[test]
fn truncated_spectrum_is_rotation_invariant() {
    let kappa = 1.6;
    let expand = |rho: &DensitySpec, mode| -> Vec<f64> {
        let s = solve_spectrum(&assemble(3, 5, rho, mode).unwrap()).unwrap();
        s.levels.iter().flat_map(|l| std::iter::repeat_n(l.value, l.multiplicity as usize)).collect()
    };
    let a = expand(&DensitySpec::linear(3, kappa).unwrap(), AssemblyMode::ZonalBlocks);
    let b = expand(&tilted(kappa, -1.1), AssemblyMode::Full);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
}

#[test]
fn general_engine_sum_rule_matches_zonal() {
    let kappa = 1.0;
    let zonal = sum_rule(3, 2, &DensitySpec::linear(3, kappa).unwrap(), 200).unwrap();
    let general = sum_rule(3, 2, &tilted(kappa, 0.3), 24).unwrap();
    let gap = (zonal.value - general.value).abs();
    assert!(gap <= general.trunc_error.max(1e-6), "{} vs {} (err {})", zonal.value, general.value, general.trunc_error);
}

#[test]
fn zonal_request_for_tilted_density_is_rejected() {
    assert!(assemble(3, 3, &tilted(1.0, 0.0), AssemblyMode::ZonalBlocks).is_err());
}
