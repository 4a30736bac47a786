//! Gauss–Jacobi rules for the symmetric weight (1−x²)^α on [−1, 1].
//!
//! Nodes come from the Golub–Welsch eigenproblem of the Jacobi matrix and
//! are then polished by Newton steps on the orthonormal recurrence; weights
//! use the Christoffel sum 1/Σₖ pₖ(xᵢ)², which stays accurate for large α.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special::jacobi_mass;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub degree_exact: usize,
}

impl QuadratureRule {
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Squared off-diagonal of the orthonormal recurrence for (1−x²)^α.
fn recurrence_b2(alpha: f64, n: usize) -> f64 {
    let n = n as f64;
    if n == 1.0 {
        return 1.0 / (3.0 + 2.0 * alpha);
    }
    n * (n + 2.0 * alpha) / ((2.0 * n + 2.0 * alpha + 1.0) * (2.0 * n + 2.0 * alpha - 1.0))
}

/// Orthonormal polynomials p₀..p_{n} for the weight (1−x²)^α, evaluated at x.
pub fn orthonormal_values(alpha: f64, n: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    let p0 = 1.0 / jacobi_mass(alpha).sqrt();
    out.push(p0);
    if n == 0 {
        return;
    }
    let mut b_prev = 0.0;
    let mut prev = 0.0;
    let mut cur = p0;
    for k in 0..n {
        let b_next = recurrence_b2(alpha, k + 1).sqrt();
        let next = (x * cur - b_prev * prev) / b_next;
        out.push(next);
        prev = cur;
        cur = next;
        b_prev = b_next;
    }
}

/// p_n(x) and p_n'(x) for the orthonormal family, plus Σ_{k<n} p_k(x)².
fn eval_with_derivative(alpha: f64, n: usize, x: f64) -> (f64, f64, f64) {
    let p0 = 1.0 / jacobi_mass(alpha).sqrt();
    let (mut prev, mut cur) = (0.0, p0);
    let (mut dprev, mut dcur) = (0.0, 0.0);
    let mut b_prev = 0.0;
    let mut christoffel = 0.0;
    for k in 0..n {
        christoffel += cur * cur;
        let b_next = recurrence_b2(alpha, k + 1).sqrt();
        let next = (x * cur - b_prev * prev) / b_next;
        let dnext = (cur + x * dcur - b_prev * dprev) / b_next;
        prev = cur;
        cur = next;
        dprev = dcur;
        dcur = dnext;
        b_prev = b_next;
    }
    (cur, dcur, christoffel)
}

/// Gauss–Jacobi rule with `npoints` nodes for the weight (1−x²)^α.
pub fn gauss_jacobi(alpha: f64, npoints: usize) -> Result<QuadratureRule> {
    if npoints == 0 {
        return Err(Error::Domain("quadrature needs at least one node".into()));
    }
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("Jacobi exponent {alpha} must exceed -1")));
    }
    let n = npoints;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = recurrence_b2(alpha, k).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::try_new(jac, 1e-15, 10_000)
        .ok_or_else(|| Error::NoConvergence(format!("Jacobi matrix eigensolve (n={n})")))?;
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        let mut converged = false;
        for _ in 0..20 {
            let (p, dp, _) = eval_with_derivative(alpha, n, *x);
            if dp == 0.0 || !dp.is_finite() {
                break;
            }
            let step = p / dp;
            *x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-3) {
                converged = true;
                break;
            }
        }
        if !converged && !x.is_finite() {
            return Err(Error::NoConvergence(format!(
                "Gauss-Jacobi node refinement (alpha={alpha}, n={n})"
            )));
        }
        let (_, _, christoffel) = eval_with_derivative(alpha, n, *x);
        weights.push(1.0 / christoffel);
    }
    // enforce exact antisymmetry of the nodes
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights, alpha, degree_exact: 2 * n - 1 })
}

type RuleCache = RwLock<HashMap<(u64, usize), Arc<QuadratureRule>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Memoized [`gauss_jacobi`]; rules are immutable and shared across threads.
pub fn cached_rule(alpha: f64, npoints: usize) -> Result<Arc<QuadratureRule>> {
    let key = (alpha.to_bits(), npoints);
    if let Some(rule) = cache().read().unwrap().get(&key) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(gauss_jacobi(alpha, npoints)?);
    cache().write().unwrap().entry(key).or_insert_with(|| rule.clone());
    Ok(rule)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn integrate_legendre<F: FnMut(f64) -> f64>(a: f64, b: f64, npoints: usize, mut f: F) -> f64 {
    let rule = cached_rule(0.0, npoints).expect("Legendre rule");
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.integrate(|x| f(mid + half * x)) * half
}

/// Adaptive Gauss–Legendre integration on [a, b] to absolute tolerance `tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const ORDER: usize = 20;
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let left = integrate_legendre(a, m, ORDER, f);
        let right = integrate_legendre(m, b, ORDER, f);
        let refined = left + right;
        if (refined - whole).abs() <= tol || (b - a).abs() <= 1e-15 * (a.abs() + b.abs()) {
            return Ok(refined);
        }
        if depth == 0 {
            return Err(Error::NoConvergence(format!(
                "adaptive quadrature on [{a}, {b}]"
            )));
        }
        let child_tol = tol * std::f64::consts::FRAC_1_SQRT_2;
        Ok(recurse(f, a, m, left, child_tol, depth - 1)?
            + recurse(f, m, b, right, child_tol, depth - 1)?)
    }
    let whole = integrate_legendre(a, b, ORDER, f);
    recurse(f, a, b, whole, tol, 60)
}
