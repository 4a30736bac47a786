//! Renormalized sum rules Σ′ 1/E_nᵖ for −Δψ = EΣψ on S^d.
//!
//! Everything is evaluated in coefficient space. The finite functionals
//! (I₁, I₂, I₃ and the perturbative zero-mode energies) involve only vectors
//! supported on a few degrees and are exact once the cutoff reaches three
//! times the density degree. The traces J₁, J₂ are infinite sums: their
//! density-free diagonal part is summed exactly with an Euler–Maclaurin tail,
//! and the remainder is computed for a ladder of truncations and extrapolated
//! in inverse powers of the cutoff.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{positivity_bound, DensitySpec};
use crate::error::{Error, Result};
use crate::harmonics::degeneracy;
use crate::operator::CoefficientOperator;
use crate::special::{sphere_volume, ZETA3};
use crate::summation::{euler_maclaurin_tail, extrapolate_limit, Jet};

/// Default truncation for the infinite traces.
pub const DEFAULT_ELL_CUT: usize = 200;

const DIRECT_TERMS: usize = 200;

/// Smallest order p for which Σ g_ℓ/λ_ℓᵖ converges on S^d.
pub fn p_min(d: usize) -> usize {
    (d + 2) / 2
}

fn check_dimension(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Domain(format!("sphere dimension must be at least 2, got {d}")));
    }
    Ok(())
}

/// g_ℓ as a polynomial in ℓ, evaluated on a jet.
pub fn degeneracy_jet(d: usize, x: Jet) -> Jet {
    let mut acc = x * 2.0 + (d as f64 - 1.0);
    for k in 1..=d.saturating_sub(2) {
        acc = acc * (x + k as f64);
    }
    let factorial: f64 = (1..d).map(|k| k as f64).product();
    acc * factorial.recip()
}

/// λ_ℓ = ℓ(ℓ + d − 1) on a jet.
pub fn eigenvalue_jet(d: usize, x: Jet) -> Jet {
    x * (x + (d as f64 - 1.0))
}

/// Σ_{ℓ ≥ 1} g_ℓ f(ℓ) for a smooth summand decaying faster than ℓ^{−d}.
pub fn degree_series<F: Fn(Jet) -> Jet>(d: usize, f: F) -> Result<f64> {
    degree_series_from(d, 1, f)
}

/// Σ_{ℓ ≥ start} g_ℓ f(ℓ); terms below a fixed threshold are added directly.
pub fn degree_series_from<F: Fn(Jet) -> Jet>(d: usize, start: usize, f: F) -> Result<f64> {
    let switch = start.max(DIRECT_TERMS);
    let direct: f64 = (start..switch)
        .map(|l| degeneracy(d, l) as f64 * f(Jet::constant(l as f64)).value())
        .sum();
    let tail = euler_maclaurin_tail(|x| degeneracy_jet(d, x) * f(x), switch)?;
    Ok(direct + tail)
}

/// ζ^{(d)}(p) = Σ_{ℓ≥1} g_ℓ/λ_ℓᵖ.
pub fn zeta_uniform(d: usize, p: usize) -> Result<f64> {
    check_dimension(d)?;
    if p < p_min(d) {
        return Err(Error::DivergentSumRule { d, p });
    }
    degree_series(d, |x| eigenvalue_jet(d, x).powi(-(p as i32)))
}

/// The functionals built from Σ and the Green's functions G^{(d,q)}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegralKind {
    I1(usize),
    I2(usize, usize),
    I3(usize, usize, usize),
    J1(usize, usize),
    J2(usize, usize, usize),
}

impl fmt::Display for IntegralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegralKind::I1(q) => write!(f, "I1({q})"),
            IntegralKind::I2(q, p) => write!(f, "I2({q},{p})"),
            IntegralKind::I3(q, p, r) => write!(f, "I3({q},{p},{r})"),
            IntegralKind::J1(q, p) => write!(f, "J1({q},{p})"),
            IntegralKind::J2(q, p, r) => write!(f, "J2({q},{p},{r})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub trunc_error: f64,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Estimate { value, trunc_error: 0.0 }
    }
}

type WeightFn = Box<dyn Fn(Jet) -> Jet + Send + Sync>;

/// Coefficient-space evaluator for one density at one cutoff.
pub struct Engine {
    pub density: DensitySpec,
    pub op: CoefficientOperator,
    vol: f64,
}

impl Engine {
    /// The operator is built with at least 3L + 1 degrees so that the finite
    /// functionals are exact.
    pub fn new(density: &DensitySpec, ell_cut: usize) -> Result<Self> {
        let needed = 3 * density.max_ell().max(1) + 1;
        let op = CoefficientOperator::new(density, ell_cut.max(needed))?;
        Ok(Engine { density: density.clone(), op, vol: sphere_volume(density.d) })
    }

    pub fn d(&self) -> usize {
        self.op.d
    }

    pub fn ell_cut(&self) -> usize {
        self.op.ell_cut
    }

    /// Apply G^{(q)} (weights 1/λ^{q+1}, zero on the constant) to an anchor vector.
    fn green_apply(&self, q: usize, v: &[Complex64]) -> Vec<Complex64> {
        let d = self.d();
        self.op
            .anchor_block()
            .ells
            .iter()
            .zip(v)
            .map(|(&l, &x)| if l == 0 { Complex64::new(0.0, 0.0) } else { x / crate::harmonics::eigenvalue(d, l).powi(q as i32 + 1) })
            .collect()
    }

    fn sigma(&self) -> &[Complex64] {
        &self.op.sigma
    }

    fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    pub fn i1(&self, q: usize) -> f64 {
        Self::dot(self.sigma(), &self.green_apply(q, self.sigma())).re
    }

    pub fn i2(&self, q: usize, p: usize) -> f64 {
        let block = self.op.anchor_block();
        let right = block.apply(&self.green_apply(p, self.sigma()));
        Self::dot(&self.green_apply(q, self.sigma()), &right).re
    }

    pub fn i3(&self, q: usize, p: usize, r: usize) -> f64 {
        let block = self.op.anchor_block();
        let v = block.apply(&self.green_apply(r, self.sigma()));
        let v = block.apply(&self.green_apply(p, &v));
        Self::dot(&self.green_apply(q, self.sigma()), &v).re
    }

    /// Tr(D₁SD₂S⋯D_kS) over all nonzero modes, with D_f = diag(w_f(λ_ℓ)).
    pub fn infinite_trace(&self, factors: Vec<WeightFn>) -> Result<Estimate> {
        let d = self.d();
        let cut = self.ell_cut();
        let arrays: Vec<Vec<f64>> = factors
            .iter()
            .map(|f| {
                (0..=cut)
                    .map(|l| if l == 0 { 0.0 } else { f(Jet::constant(l as f64)).value() })
                    .collect()
            })
            .collect();
        let buckets = self.op.cycle_trace_buckets(&arrays);
        let diagonal = |l: usize| degeneracy(d, l) as f64 * arrays.iter().map(|a| a[l]).product::<f64>();
        let exact_diagonal = degree_series(d, |x| factors.iter().fold(Jet::constant(1.0), |acc, f| acc * f(x)))?;
        if self.density.is_uniform() {
            return Ok(Estimate::exact(exact_diagonal));
        }
        let mut remainder = Vec::with_capacity(cut + 1);
        let mut running = 0.0;
        for (l, b) in buckets.iter().enumerate() {
            if l > 0 {
                running += b - diagonal(l);
            }
            remainder.push(running);
        }
        let start = (cut / 2).max(2);
        let step = ((cut - start) / 10).max(1);
        let ns: Vec<usize> = (start..=cut).step_by(step).collect();
        if ns.len() < 4 {
            return Err(Error::CutoffTooSmall(format!(
                "ell_cut = {cut} is too small to extrapolate the trace"
            )));
        }
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| remainder[n]).collect();
        let (limit, err) = extrapolate_limit(&xs, &ys)?;
        let value = exact_diagonal + limit;
        Ok(Estimate { value, trunc_error: err + 4.0 * f64::EPSILON * value.abs() })
    }

    fn green_weight(&self, q: usize) -> WeightFn {
        let d = self.d();
        Box::new(move |x| eigenvalue_jet(d, x).powi(-(q as i32 + 1)))
    }

    pub fn j1(&self, q: usize, p: usize) -> Result<Estimate> {
        let d = self.d();
        if 2 * (p + q + 2) <= d {
            return Err(Error::Divergent(format!("J1({q},{p}) diverges on S^{d}")));
        }
        self.infinite_trace(vec![self.green_weight(q), self.green_weight(p)])
    }

    pub fn j2(&self, q: usize, p: usize, r: usize) -> Result<Estimate> {
        let d = self.d();
        if 2 * (p + q + r + 3) <= d {
            return Err(Error::Divergent(format!("J2({q},{p},{r}) diverges on S^{d}")));
        }
        self.infinite_trace(vec![self.green_weight(q), self.green_weight(p), self.green_weight(r)])
    }

    pub fn integral(&self, kind: IntegralKind) -> Result<Estimate> {
        Ok(match kind {
            IntegralKind::I1(q) => Estimate::exact(self.i1(q)),
            IntegralKind::I2(q, p) => Estimate::exact(self.i2(q, p)),
            IntegralKind::I3(q, p, r) => Estimate::exact(self.i3(q, p, r)),
            IntegralKind::J1(q, p) => self.j1(q, p)?,
            IntegralKind::J2(q, p, r) => self.j2(q, p, r)?,
        })
    }

    /// Closed-form zero-mode energy coefficients ε₁…ε₄.
    pub fn epsilon(&self) -> EpsilonCoeffs {
        // the constant part of Σ is pinned to 1, so ∫Σ = Vol(S^d) and ε₁ = 1
        let v = self.vol;
        let (i10, i11, i12) = (self.i1(0) / v, self.i1(1) / v, self.i1(2) / v);
        let (i200, i201, i210) = (self.i2(0, 0) / v, self.i2(0, 1) / v, self.i2(1, 0) / v);
        let i3 = self.i3(0, 0, 0) / v;
        let e2 = -i10;
        let e3 = i11 + 2.0 * i10 * i10 - i200;
        let e4 = -i12 + (i201 - 4.0 * i10 * i11 + i210) + (-5.0 * i10.powi(3) + 5.0 * i10 * i200 - i3);
        EpsilonCoeffs { eps: [1.0, e2, e3, e4] }
    }

    /// ε_k from the order-by-order zero-mode recursion.
    pub fn epsilon_recursive(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain("perturbative order must be at least 1".into()));
        }
        let l = self.density.max_ell().max(1);
        if self.ell_cut() < k * l {
            return Err(Error::CutoffTooSmall(format!(
                "order {k} needs ell_cut >= {} for a density of degree {l}",
                k * l
            )));
        }
        let block = self.op.anchor_block();
        let n = block.len();
        let mut psi0 = vec![Complex64::new(0.0, 0.0); n];
        psi0[0] = Complex64::new(1.0, 0.0);
        let s_psi0 = block.apply(&psi0);
        let norm = Self::dot(&psi0, &s_psi0).re;
        let mut eps = vec![0.0; k + 1];
        let mut psi = vec![psi0.clone()];
        let mut s_psi = vec![s_psi0];
        for order in 1..=k {
            let mut proj = 0.0;
            for j in 1..order {
                proj += eps[j] * Self::dot(&psi0, &s_psi[order - j]).re;
            }
            eps[order] = if order == 1 { 1.0 / norm } else { -proj / norm };
            if order == k {
                break;
            }
            let mut rhs = vec![Complex64::new(0.0, 0.0); n];
            for j in 1..=order {
                for (r, s) in rhs.iter_mut().zip(&s_psi[order - j]) {
                    *r += s * eps[j];
                }
            }
            for (r, p) in rhs.iter_mut().zip(&psi[order - 1]) {
                *r -= p;
            }
            let next = self.green_apply(0, &rhs);
            s_psi.push(block.apply(&next));
            psi.push(next);
        }
        Ok(eps[k])
    }

    /// Z(γ) split by powers of 1/γ: `a[k]` multiplies γ^{−k}.
    fn shifted_trace_coefficients(&self, p: usize, gamma: f64) -> Result<(Vec<f64>, f64)> {
        let d = self.d();
        let block = self.op.anchor_block();
        let n = block.len();
        let mut e0 = vec![Complex64::new(0.0, 0.0); n];
        e0[0] = Complex64::new(1.0, 0.0);
        let u = block.apply(&e0);
        let s00 = u[0].re;
        let ru: Vec<Complex64> = block
            .ells
            .iter()
            .zip(&u)
            .map(|(&l, &x)| if l == 0 { Complex64::new(0.0, 0.0) } else { x / (crate::harmonics::eigenvalue(d, l) + gamma) })
            .collect();
        let urv = Self::dot(&u, &ru).re;
        let shift: WeightFn = Box::new(move |x| (eigenvalue_jet(d, x) + gamma).recip());
        let shift2: WeightFn = Box::new(move |x| (eigenvalue_jet(d, x) + gamma).recip());
        match p {
            2 => {
                let a0 = self.infinite_trace(vec![shift, shift2])?;
                Ok((vec![a0.value, 2.0 * urv, s00 * s00], a0.trunc_error))
            }
            3 => {
                let shift3: WeightFn = Box::new(move |x| (eigenvalue_jet(d, x) + gamma).recip());
                let a0 = self.infinite_trace(vec![shift, shift2, shift3])?;
                let a1 = 3.0 * Self::dot(&ru, &block.apply(&ru)).re;
                Ok((vec![a0.value, a1, 3.0 * s00 * urv, s00.powi(3)], a0.trunc_error))
            }
            _ => Err(Error::UnsupportedOrder(p)),
        }
    }
}

/// Zero-mode energy coefficients, E₀(γ) = Σ ε_k γ^k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonCoeffs {
    pub eps: [f64; 4],
}

impl EpsilonCoeffs {
    /// Coefficients b_j of (ε₁ + ε₂γ + ε₃γ² + ε₄γ³)^{−p} = Σ b_j γ^j.
    pub fn inverse_power_series(&self, p: usize, terms: usize) -> Vec<f64> {
        let e = self.eps;
        let mut inv = vec![0.0; terms];
        inv[0] = 1.0 / e[0];
        for j in 1..terms {
            let mut s = 0.0;
            for k in 1..=j.min(3) {
                s += e[k] * inv[j - k];
            }
            inv[j] = -s / e[0];
        }
        let mut out = vec![0.0; terms];
        out[0] = 1.0;
        for _ in 0..p {
            let mut next = vec![0.0; terms];
            for (i, &a) in out.iter().enumerate() {
                for (j, &b) in inv.iter().enumerate().take(terms - i) {
                    next[i + j] += a * b;
                }
            }
            out = next;
        }
        out
    }
}

pub fn density_integrals(kind: IntegralKind, density: &DensitySpec, ell_cut: usize) -> Result<Estimate> {
    Engine::new(density, ell_cut)?.integral(kind)
}

pub fn epsilon_closed(density: &DensitySpec) -> Result<EpsilonCoeffs> {
    Ok(Engine::new(density, 0)?.epsilon())
}

pub fn epsilon_recursive(density: &DensitySpec, order: usize, ell_cut: usize) -> Result<f64> {
    if order > 6 {
        return Err(Error::Domain(format!("perturbative order {order} exceeds 6")));
    }
    Engine::new(density, ell_cut)?.epsilon_recursive(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactEngine,
    ClosedForm,
    Hybrid,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::ExactEngine => "exact-engine",
            Provenance::ClosedForm => "closed-form",
            Provenance::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumRuleResult {
    pub d: usize,
    pub p: usize,
    pub density: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<crate::density::CoeffRecord>>,
    pub value: f64,
    pub trunc_error: f64,
    pub provenance: Provenance,
    pub ell_cut: usize,
}

impl SumRuleResult {
    pub fn new(d: usize, p: usize, density: &DensitySpec, est: Estimate, provenance: Provenance, ell_cut: usize) -> Self {
        SumRuleResult {
            d,
            p,
            density: density.to_string(),
            kappa: density.zonal_kappa,
            coeffs: density.zonal_kappa.is_none().then(|| density.to_records()),
            value: est.value,
            trunc_error: est.trunc_error,
            provenance,
            ell_cut,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}

fn check_order(d: usize, p: usize) -> Result<()> {
    check_dimension(d)?;
    if p < p_min(d) {
        return Err(Error::DivergentSumRule { d, p });
    }
    if p > 3 {
        return Err(Error::UnsupportedOrder(p));
    }
    Ok(())
}

/// Σ′ 1/E_nᵖ for p = 2, 3 assembled from the I and J functionals.
pub fn sum_rule(d: usize, p: usize, density: &DensitySpec, ell_cut: usize) -> Result<SumRuleResult> {
    check_order(d, p)?;
    if density.d != d {
        return Err(Error::MixedDimensions(d, density.d));
    }
    let engine = Engine::new(density, ell_cut)?;
    let v = engine.vol;
    let i1 = engine.i1(0) / v;
    let i2 = engine.i2(0, 0) / v;
    let est = match p {
        2 => {
            let j = engine.j1(0, 0)?;
            Estimate { value: j.value + i1 * i1 - 2.0 * i2, trunc_error: j.trunc_error }
        }
        _ => {
            let j = engine.j2(0, 0, 0)?;
            let i3 = engine.i3(0, 0, 0) / v;
            Estimate { value: j.value - i1.powi(3) + 3.0 * i1 * i2 - 3.0 * i3, trunc_error: j.trunc_error }
        }
    };
    Ok(SumRuleResult::new(d, p, density, est, Provenance::ExactEngine, engine.ell_cut()))
}

/// The printed κ-polynomials for Σ = 1 + κY_{1,0⃗}.
pub fn closed_form_reference(d: usize, p: usize, kappa: f64) -> Result<f64> {
    use std::f64::consts::PI;
    if !matches!((d, p), (3, 2) | (3, 3) | (4, 3) | (5, 3)) {
        if d >= 2 && p < p_min(d) {
            return Err(Error::DivergentSumRule { d, p });
        }
        return Err(Error::Unsupported(format!("no closed form for d={d}, p={p}")));
    }
    let bound = positivity_bound(d);
    if !kappa.is_finite() || kappa.abs() >= bound {
        return Err(Error::PositivityViolated { kappa: kappa.abs(), bound });
    }
    let k2 = kappa * kappa;
    let (k4, k6) = (k2 * k2, k2 * k2 * k2);
    let pi2 = PI * PI;
    Ok(match (d, p) {
        (3, 2) => (3.0 + 4.0 * pi2) / 48.0 + 7.0 * k2 / (36.0 * pi2) + k4 / (36.0 * pi2 * pi2),
        (3, 3) => {
            (2.0 * pi2 - 3.0) / 96.0 + (1.0 / 24.0 - 103.0 / (288.0 * pi2)) * k2
                + 5.0 * k4 / (288.0 * pi2 * pi2)
                - k6 / (216.0 * pi2.powi(3))
        }
        (4, 3) => {
            23.0 / 1458.0 + 2.0 * ZETA3 / 27.0 + 49.0 * k2 / (1152.0 * pi2)
                + 513.0 * k4 / (143360.0 * pi2 * pi2)
                - 27.0 * k6 / (32768.0 * pi2.powi(3))
        }
        _ => {
            (15.0 + 152.0 * pi2) / 18432.0
                + (529.0 / (96000.0 * PI.powi(3)) + 1.0 / (80.0 * PI)) * k2
                + 23.0 * k4 / (2000.0 * PI.powi(6))
                - k6 / (125.0 * PI.powi(9))
        }
    })
}

/// Shifted trace Z(γ) = Σ_n 1/E_n(γ)ᵖ and its renormalized part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftedSumRule {
    pub gamma: f64,
    pub z: f64,
    pub z_renorm: f64,
    pub trunc_error: f64,
}

pub fn sum_rule_shifted(
    d: usize,
    p: usize,
    density: &DensitySpec,
    gamma: f64,
    ell_cut: usize,
) -> Result<ShiftedSumRule> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("shift gamma = {gamma} must be positive")));
    }
    check_order(d, p)?;
    if density.d != d {
        return Err(Error::MixedDimensions(d, density.d));
    }
    let engine = Engine::new(density, ell_cut)?;
    let (a, err) = engine.shifted_trace_coefficients(p, gamma)?;
    let b = engine.epsilon().inverse_power_series(p, 40);
    let z: f64 = a.iter().enumerate().map(|(k, &ak)| ak * gamma.powi(-(k as i32))).sum();
    let mut z_renorm = a[0];
    for k in 1..=p {
        z_renorm += (a[k] - b[p - k]) * gamma.powi(-(k as i32));
    }
    let mut g = 1.0;
    for &bj in &b[p..] {
        z_renorm -= bj * g;
        g *= gamma;
    }
    Ok(ShiftedSumRule { gamma, z, z_renorm, trunc_error: err })
}
