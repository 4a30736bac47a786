//! Green's function identities checked by direct integration over S³.

use std::f64::consts::PI;

use sphere_sumrules::greens::{green_closed_form, green_spectral, GreenOrder};
use sphere_sumrules::quadrature::integrate_legendre;

/// ∫ G(x,z) G(z,y) dz with x at the pole and y at polar angle `theta`.
fn convolve_d3(g: impl Fn(f64) -> f64 + Copy, theta: f64, n: usize) -> f64 {
    let (st, ct) = theta.sin_cos();
    let outer = |t1: f64| {
        let (s1, c1) = t1.sin_cos();
        let inner = integrate_legendre(0.0, PI, n, |psi| {
            let c = (c1 * ct + s1 * st * psi.cos()).clamp(-1.0, 1.0);
            2.0 * PI * psi.sin() * g(c.acos())
        });
        s1 * s1 * g(t1) * inner
    };
    integrate_legendre(0.0, theta, n, outer) + integrate_legendre(theta, PI, n, outer)
}

#[test]
fn convolution_raises_the_order() {
    let g1 = |t: f64| if t < 1e-300 { f64::NAN } else { green_closed_form(3, 1, t).unwrap() };
    let target = GreenOrder::unshifted(3, 3).unwrap();
    for &theta in &[0.6, 1.4, 2.5] {
        let conv = convolve_d3(g1, theta, 400);
        let spec = green_spectral(&target, theta.cos(), 20_000).unwrap();
        assert!(spec.tail_bound < 1e-12);
        assert!((conv - spec.value).abs() < 1e-8, "theta={theta}: {conv} vs {}", spec.value);
    }
}

#[test]
fn zero_mean_over_the_sphere() {
    for q in 0..=2 {
        let mean = integrate_legendre(0.0, PI, 600, |t| {
            4.0 * PI * t.sin().powi(2) * green_closed_form(3, q, t).unwrap()
        });
        assert!(mean.abs() < 1e-8, "q={q}: {mean}");
    }
}

#[test]
fn closed_forms_track_spectral_sums_in_every_dimension() {
    for d in 2..=4 {
        for q in 0..=2 {
            let order = GreenOrder::unshifted(d, q).unwrap();
            if !order.has_summable_envelope() {
                continue;
            }
            for &theta in &[0.4f64, 1.7, 2.9] {
                let s = green_spectral(&order, theta.cos(), 50_000).unwrap();
                let c = green_closed_form(d, q, theta).unwrap();
                assert!((s.value - c).abs() <= s.tail_bound + 1e-11, "d={d} q={q} theta={theta}");
            }
        }
    }
}
