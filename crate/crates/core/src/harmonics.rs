//! Hyperspherical harmonics on S^d and their triple-product couplings.
//!
//! A harmonic Y_{ℓ,m⃗} factorizes over the polar angles θ₁,…,θ_{d−1} and the
//! azimuth φ. With m₁ = ℓ, the factor for θ_k is
//! sin^{a_k}θ_k · p̃_{n_k}^{(λ_k)}(cos θ_k), where a_k = m_{k+1} (|m_d| on the
//! last polar level), n_k = m_k − a_k and λ_k = a_k + (d−k)/2, and p̃ is the
//! Gegenbauer polynomial normalized against its own weight. The product of
//! these unit-norm factors is already orthonormal, so no separate
//! normalization constant has to be carried around.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{cached_rule, orthonormal_values, QuadratureRule};
use crate::special::sphere_volume;

/// Quantum numbers (ℓ, m₂, …, m_d) of a harmonic on S^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub d: usize,
    pub ell: usize,
    pub m: Vec<i64>,
}

impl HarmonicIndex {
    pub fn new(d: usize, ell: usize, m: Vec<i64>) -> Result<Self> {
        let idx = HarmonicIndex { d, ell, m };
        idx.validate()?;
        Ok(idx)
    }

    /// The constant-free zonal harmonic (ℓ, 0⃗).
    pub fn zonal(d: usize, ell: usize) -> Self {
        HarmonicIndex { d, ell, m: vec![0; d.saturating_sub(1)] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidIndex(format!("dimension {} < 2", self.d)));
        }
        if self.m.len() != self.d - 1 {
            return Err(Error::InvalidIndex(format!(
                "expected {} magnetic numbers, got {}",
                self.d - 1,
                self.m.len()
            )));
        }
        let mut upper = self.ell as i64;
        for (k, &mk) in self.m.iter().enumerate() {
            let last = k + 1 == self.m.len();
            let ok = if last { mk.abs() <= upper } else { (0..=upper).contains(&mk) };
            if !ok {
                return Err(Error::InvalidIndex(format!(
                    "ordering l >= m2 >= ... >= |m_d| violated by {self}"
                )));
            }
            upper = mk;
        }
        Ok(())
    }

    /// (m₁, …, m_d) with m₁ = ℓ.
    fn levels(&self) -> Vec<i64> {
        let mut v = Vec::with_capacity(self.d);
        v.push(self.ell as i64);
        v.extend_from_slice(&self.m);
        v
    }

    pub fn m_last(&self) -> i64 {
        *self.m.last().expect("d >= 2")
    }

    pub fn is_zonal(&self) -> bool {
        self.m.iter().all(|&v| v == 0)
    }

    /// Polar factor data (a_k, n_k, λ_k) for k = 1, …, d−1.
    fn polar_factors(&self) -> Vec<(usize, usize, f64)> {
        let lv = self.levels();
        (1..self.d)
            .map(|k| {
                let a = if k == self.d - 1 { lv[k].unsigned_abs() } else { lv[k] as u64 } as usize;
                let n = lv[k - 1] as usize - a;
                (a, n, a as f64 + (self.d - k) as f64 / 2.0)
            })
            .collect()
    }
}

impl fmt::Display for HarmonicIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(l={}, m={:?})", self.ell, self.m)
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of independent harmonics of degree ℓ on S^d.
pub fn degeneracy(d: usize, ell: usize) -> u128 {
    let (d, l) = (d as u64, ell as u64);
    (2 * l + d - 1) as u128 * binomial(l + d - 2, l) / (d - 1) as u128
}

/// ℓ(ℓ + d − 1).
pub fn eigenvalue(d: usize, ell: usize) -> f64 {
    (ell * (ell + d - 1)) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisConstants {
    pub g: u128,
    pub lambda: f64,
    pub vol: f64,
}

pub fn basis_constants(d: usize, ell: usize) -> Result<BasisConstants> {
    if d < 2 {
        return Err(Error::Domain(format!("sphere dimension must be at least 2, got {d}")));
    }
    Ok(BasisConstants { g: degeneracy(d, ell), lambda: eigenvalue(d, ell), vol: sphere_volume(d) })
}

/// Gegenbauer polynomial C_n^{(α)}(x) by the three-term recurrence.
pub fn gegenbauer(alpha: f64, n: usize, x: f64) -> Result<f64> {
    if !(alpha > -0.5) {
        return Err(Error::Domain(format!("Gegenbauer order {alpha} must exceed -1/2")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("Gegenbauer argument {x} outside [-1, 1]")));
    }
    let (mut prev, mut cur) = (1.0, 2.0 * alpha * x);
    if n == 0 {
        return Ok(prev);
    }
    for k in 2..=n {
        let kf = k as f64;
        let next = (2.0 * x * (kf + alpha - 1.0) * cur - (kf + 2.0 * alpha - 2.0) * prev) / kf;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Ratios C_ℓ^{(α)}(x)/C_ℓ^{(α)}(1) for ℓ = 0..=ell_max.
pub fn gegenbauer_ratios(alpha: f64, ell_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(ell_max + 1);
    out.push(1.0);
    if ell_max >= 1 {
        out.push(x);
    }
    for n in 2..=ell_max {
        let nf = n as f64;
        let r = (2.0 * x * (nf + alpha - 1.0) * out[n - 1] - (nf - 1.0) * out[n - 2])
            / (nf + 2.0 * alpha - 1.0);
        out.push(r);
    }
    out
}

/// Unit-norm Gegenbauer polynomial p̃_n^{(λ)}(x) for the weight (1−x²)^{λ−1/2}.
pub fn normalized_gegenbauer(lambda: f64, n: usize, x: f64) -> f64 {
    let mut buf = Vec::with_capacity(n + 1);
    orthonormal_values(lambda - 0.5, n, x, &mut buf);
    buf[n]
}

fn azimuthal_phase(m_last: i64) -> f64 {
    if m_last > 0 && m_last % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Y_{ℓ,m⃗}(Ω) with Ω = (θ₁, …, θ_{d−1}, φ).
pub fn eval_harmonic(idx: &HarmonicIndex, omega: &[f64]) -> Result<Complex64> {
    idx.validate()?;
    if omega.len() != idx.d {
        return Err(Error::Domain(format!(
            "expected {} angles on S^{}, got {}",
            idx.d,
            idx.d,
            omega.len()
        )));
    }
    let mut value = azimuthal_phase(idx.m_last()) / (2.0 * std::f64::consts::PI).sqrt();
    for (k, (a, n, lambda)) in idx.polar_factors().into_iter().enumerate() {
        let theta = omega[k];
        value *= theta.sin().powi(a as i32) * normalized_gegenbauer(lambda, n, theta.cos());
    }
    let phi = omega[idx.d - 1];
    Ok(Complex64::from_polar(value, idx.m_last() as f64 * phi))
}

/// Σ_{m⃗} Y_{ℓ,m⃗}(Ω)Y*_{ℓ,m⃗}(Ω′) as a function of the angle between Ω and Ω′.
pub fn addition_eval(d: usize, ell: usize, cosgamma: f64) -> Result<f64> {
    let c = basis_constants(d, ell)?;
    if !(-1.0..=1.0).contains(&cosgamma) {
        return Err(Error::Domain(format!("cos(gamma) = {cosgamma} outside [-1, 1]")));
    }
    let alpha = (d as f64 - 1.0) / 2.0;
    let ratio = gegenbauer_ratios(alpha, ell, cosgamma)[ell];
    Ok(c.g as f64 / c.vol * ratio)
}

/// All indices of degree ℓ on S^d, in lexicographic order of m⃗.
pub fn indices_of_degree(d: usize, ell: usize) -> Vec<HarmonicIndex> {
    fn recurse(d: usize, ell: usize, upper: i64, prefix: &mut Vec<i64>, out: &mut Vec<HarmonicIndex>) {
        if prefix.len() + 1 == d - 1 {
            for m in -upper..=upper {
                prefix.push(m);
                out.push(HarmonicIndex { d, ell, m: prefix.clone() });
                prefix.pop();
            }
            return;
        }
        for m in 0..=upper {
            prefix.push(m);
            recurse(d, ell, m, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    recurse(d, ell, ell as i64, &mut Vec::new(), &mut out);
    out
}

/// Basis of all harmonics with ℓ ≤ ell_max, ℓ ascending then m⃗ lexicographic.
pub fn truncated_indices(d: usize, ell_max: usize) -> Vec<HarmonicIndex> {
    (0..=ell_max).flat_map(|l| indices_of_degree(d, l)).collect()
}

fn triangle_parity(a: i64, b: i64, c: i64) -> bool {
    (a - b).abs() <= c && c <= a + b && (a + b + c) % 2 == 0
}

/// Selection rules for ∫Y*_{i1}Y_{i2}Y_{i3}: the azimuthal sum rule and
/// triangle/parity conditions at every polar level.
pub fn selection_rules_hold(i1: &HarmonicIndex, i2: &HarmonicIndex, i3: &HarmonicIndex) -> bool {
    if -i1.m_last() + i2.m_last() + i3.m_last() != 0 {
        return false;
    }
    let (l1, l2, l3) = (i1.levels(), i2.levels(), i3.levels());
    (0..i1.d - 1).all(|k| triangle_parity(l1[k], l2[k], l3[k]))
}

fn quadrature_for(beta: f64, degree: usize) -> Result<std::sync::Arc<QuadratureRule>> {
    cached_rule(beta, degree.div_ceil(2) + 4)
}

/// W = ∫ Y*_{i1} Y_{i2} Y_{i3} dΩ.
pub fn coupling_w(i1: &HarmonicIndex, i2: &HarmonicIndex, i3: &HarmonicIndex) -> Result<f64> {
    for other in [i2, i3] {
        if other.d != i1.d {
            return Err(Error::MixedDimensions(i1.d, other.d));
        }
    }
    for i in [i1, i2, i3] {
        i.validate()?;
    }
    if !selection_rules_hold(i1, i2, i3) {
        return Ok(0.0);
    }
    let d = i1.d;
    let (f1, f2, f3) = (i1.polar_factors(), i2.polar_factors(), i3.polar_factors());
    let mut value = azimuthal_phase(i1.m_last())
        * azimuthal_phase(i2.m_last())
        * azimuthal_phase(i3.m_last())
        / (2.0 * std::f64::consts::PI).sqrt();
    let mut b1 = Vec::new();
    let mut b2 = Vec::new();
    let mut b3 = Vec::new();
    for k in 0..d - 1 {
        let ((a1, n1, l1), (a2, n2, l2), (a3, n3, l3)) = (f1[k], f2[k], f3[k]);
        let asum = a1 + a2 + a3;
        let beta = ((d - k - 2) + asum) as f64 / 2.0;
        let rule = quadrature_for(beta, n1 + n2 + n3)?;
        let factor = rule.integrate(|x| {
            orthonormal_values(l1 - 0.5, n1, x, &mut b1);
            orthonormal_values(l2 - 0.5, n2, x, &mut b2);
            orthonormal_values(l3 - 0.5, n3, x, &mut b3);
            b1[n1] * b2[n2] * b3[n3]
        });
        value *= factor;
        if value == 0.0 {
            break;
        }
    }
    Ok(value)
}

/// Number of S^{d−1} harmonics whose leading index equals m₂; this is the
/// multiplicity of a zonal coupling block.
pub fn block_multiplicity(d: usize, m2: usize) -> u128 {
    if d == 2 {
        if m2 == 0 {
            1
        } else {
            2
        }
    } else {
        degeneracy(d - 1, m2)
    }
}

/// Coupling blocks for a zonal density: W((ℓ,m⃗),(ℓ′,m⃗),(L,0⃗)) depends on
/// m⃗ only through m₂, and is read here from a single one-dimensional rule.
#[derive(Debug, Clone)]
pub struct ZonalCouplings {
    pub d: usize,
    pub ell_max: usize,
    pub l_max: usize,
    rule: std::sync::Arc<QuadratureRule>,
    density_values: Vec<Vec<f64>>,
}

impl ZonalCouplings {
    /// Prepare couplings for basis degrees ≤ ell_max and density degrees ≤ l_max.
    pub fn new(d: usize, ell_max: usize, l_max: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("sphere dimension must be at least 2, got {d}")));
        }
        let alpha = (d as f64 - 2.0) / 2.0;
        let rule = cached_rule(alpha, (2 * ell_max + l_max).div_ceil(2) + 4)?;
        let lam = (d as f64 - 1.0) / 2.0;
        let mut buf = Vec::new();
        let density_values = rule
            .nodes
            .iter()
            .map(|&x| {
                orthonormal_values(lam - 0.5, l_max, x, &mut buf);
                buf.clone()
            })
            .collect();
        Ok(ZonalCouplings { d, ell_max, l_max, rule, density_values })
    }

    /// Matrix W[ℓ−m₂][ℓ′−m₂][L] for ℓ, ℓ′ ∈ [m₂, ell_max], L ∈ [0, l_max],
    /// zero outside the triangle and parity rules.
    pub fn block(&self, m2: usize) -> Vec<Vec<Vec<f64>>> {
        let size = self.ell_max + 1 - m2;
        let lam = m2 as f64 + (self.d as f64 - 1.0) / 2.0;
        let inv_sub = 1.0 / sphere_volume(self.d - 1).sqrt();
        let inv_sub = if self.d == 2 { 1.0 / (2.0 * std::f64::consts::PI).sqrt() } else { inv_sub };
        let mut out = vec![vec![vec![0.0; self.l_max + 1]; size]; size];
        let mut buf = Vec::new();
        for (node, (&x, &w)) in self.rule.nodes.iter().zip(&self.rule.weights).enumerate() {
            let s = (1.0 - x * x).powi(m2 as i32);
            if s == 0.0 {
                continue;
            }
            orthonormal_values(lam - 0.5, size - 1, x, &mut buf);
            let dens = &self.density_values[node];
            for n1 in 0..size {
                let f1 = w * s * buf[n1];
                for n2 in n1..size.min(n1 + self.l_max + 1) {
                    let f12 = f1 * buf[n2];
                    for (big_l, &pl) in dens.iter().enumerate() {
                        if big_l < n2 - n1 || (n1 + n2 + big_l) % 2 == 1 {
                            continue;
                        }
                        out[n1][n2][big_l] += f12 * pl;
                    }
                }
            }
        }
        for n1 in 0..size {
            for n2 in n1..size {
                for big_l in 0..=self.l_max {
                    let v = out[n1][n2][big_l] * inv_sub;
                    let v = if big_l < n2 - n1 || (n1 + n2 + big_l) % 2 == 1 { 0.0 } else { v };
                    out[n1][n2][big_l] = v;
                    out[n2][n1][big_l] = v;
                }
            }
        }
        out
    }
}

/// Cached generalized 3j values over admissible triples.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    pub d: usize,
    pub ell_max: usize,
    pub l: usize,
    pub entries: BTreeMap<(HarmonicIndex, HarmonicIndex, HarmonicIndex), f64>,
}

pub const COUPLING_CACHE_VERSION: u32 = 1;
const CACHE_MAGIC: &[u8; 4] = b"SSCT";

impl CouplingTable {
    /// W(i1, i2, i3), zero for triples that are not stored.
    pub fn get(&self, i1: &HarmonicIndex, i2: &HarmonicIndex, i3: &HarmonicIndex) -> f64 {
        self.entries
            .get(&(i1.clone(), i2.clone(), i3.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cache_file_name(d: usize, ell_max: usize, l: usize) -> String {
        format!("coupling_d{d}_lmax{ell_max}_L{l}_v{COUPLING_CACHE_VERSION}.bin")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        for v in [COUPLING_CACHE_VERSION, self.d as u32, self.ell_max as u32, self.l as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for ((a, b, c), w) in &self.entries {
            for idx in [a, b, c] {
                out.extend_from_slice(&(idx.ell as u32).to_le_bytes());
                for &m in &idx.m {
                    out.extend_from_slice(&(m as i32).to_le_bytes());
                }
            }
            out.extend_from_slice(&w.to_bits().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(Error::Cache("truncated coupling cache".into()));
            }
            let (head, tail) = cursor.split_at(n);
            cursor = tail;
            Ok(head)
        };
        if take(4)? != CACHE_MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let read_u32 = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let version = read_u32(take(4)?);
        if version != COUPLING_CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported cache version {version}")));
        }
        let d = read_u32(take(4)?) as usize;
        let ell_max = read_u32(take(4)?) as usize;
        let l = read_u32(take(4)?) as usize;
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        if d < 2 {
            return Err(Error::Cache(format!("invalid dimension {d} in cache")));
        }
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let mut triple = Vec::with_capacity(3);
            for _ in 0..3 {
                let ell = read_u32(take(4)?) as usize;
                let mut m = Vec::with_capacity(d - 1);
                for _ in 0..d - 1 {
                    m.push(i32::from_le_bytes(take(4)?.try_into().unwrap()) as i64);
                }
                triple.push(HarmonicIndex { d, ell, m });
            }
            let w = f64::from_bits(u64::from_le_bytes(take(8)?.try_into().unwrap()));
            let c = triple.pop().unwrap();
            let b = triple.pop().unwrap();
            let a = triple.pop().unwrap();
            entries.insert((a, b, c), w);
        }
        Ok(CouplingTable { d, ell_max, l, entries })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::Cache(e.to_string()))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::Cache(e.to_string()))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::Cache(e.to_string()))?;
        Self::from_bytes(&buf)
    }
}

/// All W(i₁, i₂, (L,0⃗)) with ℓ₁, ℓ₂ ≤ ell_max and the mirrored W(i₁, (L,0⃗), i₂).
pub fn zonal_coupling_table(d: usize, ell_max: usize, l: usize) -> Result<CouplingTable> {
    if l < 1 {
        return Err(Error::Domain("density degree L must be at least 1".into()));
    }
    let zc = ZonalCouplings::new(d, ell_max, l)?;
    let density = HarmonicIndex::zonal(d, l);
    let top = indices_of_degree(d, ell_max);
    let mut entries = BTreeMap::new();
    for m2 in 0..=ell_max {
        let block = zc.block(m2);
        let reps: Vec<Vec<i64>> =
            top.iter().filter(|i| leading_m(i) == m2).map(|i| i.m.clone()).collect();
        for m in reps {
            for l1 in m2..=ell_max {
                for l2 in m2..=ell_max {
                    let w = block[l1 - m2][l2 - m2][l];
                    if w == 0.0 {
                        continue;
                    }
                    let i1 = HarmonicIndex { d, ell: l1, m: m.clone() };
                    let i2 = HarmonicIndex { d, ell: l2, m: m.clone() };
                    entries.insert((i1.clone(), density.clone(), i2.clone()), w);
                    entries.insert((i1, i2, density.clone()), w);
                }
            }
        }
    }
    Ok(CouplingTable { d, ell_max, l, entries })
}

fn leading_m(i: &HarmonicIndex) -> usize {
    i.m[0].unsigned_abs() as usize
}

/// [`zonal_coupling_table`] backed by a versioned file cache in `dir`.
pub fn zonal_coupling_table_cached(d: usize, ell_max: usize, l: usize, dir: &Path) -> Result<CouplingTable> {
    let path: PathBuf = dir.join(CouplingTable::cache_file_name(d, ell_max, l));
    if path.exists() {
        if let Ok(t) = CouplingTable::read_from(&path) {
            if t.d == d && t.ell_max == ell_max && t.l == l {
                return Ok(t);
            }
        }
    }
    let table = zonal_coupling_table(d, ell_max, l)?;
    fs::create_dir_all(dir).map_err(|e| Error::Cache(e.to_string()))?;
    table.write_to(&path)?;
    Ok(table)
}
