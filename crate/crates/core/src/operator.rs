//! Truncated coefficient-space representation of multiplication by Σ.
//!
//! In the harmonic basis Σ acts through the Hermitian matrix
//! S_ij = ∫ Y*_i Σ Y_j = δ_ij + Σ_L c_L W(i, j, L), and the density itself is
//! the vector σ_i = ∫ Y*_i Σ. A zonal density never changes m⃗, so S splits
//! into blocks labelled by m₂ whose entries depend only on ℓ; each block then
//! stands for g^{(d−1)}_{m₂} identical copies.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::density::DensitySpec;
use crate::error::Result;
use crate::harmonics::{
    block_multiplicity, coupling_w, selection_rules_hold, truncated_indices, HarmonicIndex,
    ZonalCouplings,
};
use crate::special::sphere_volume;

/// One invariant subspace of S.
#[derive(Debug, Clone)]
pub struct Block {
    /// m₂ for zonal blocks; 0 for the single block of a general density.
    pub label: usize,
    pub multiplicity: f64,
    /// Degree ℓ of every basis element of the block.
    pub ells: Vec<usize>,
    /// Sparse rows of S, sorted by column, diagonal included.
    pub rows: Vec<Vec<(usize, Complex64)>>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.ells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ells.is_empty()
    }

    fn entry(&self, i: usize, j: usize) -> Complex64 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// S restricted to basis elements of degree ≤ ell_max, as dense rows.
    pub fn dense(&self, ell_max: usize) -> Vec<Vec<Complex64>> {
        let n = self.ells.iter().filter(|&&l| l <= ell_max).count();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for (i, row) in self.rows.iter().enumerate().take(n) {
            for &(j, v) in row {
                if j < n {
                    out[i][j] = v;
                }
            }
        }
        out
    }

    /// S·v on the block.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, s)| s * v[j]).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientOperator {
    pub d: usize,
    pub ell_cut: usize,
    pub blocks: Vec<Block>,
    /// Block that holds the constant harmonic (and, for zonal densities, σ).
    pub anchor: usize,
    /// σ over the anchor block.
    pub sigma: Vec<Complex64>,
}

impl CoefficientOperator {
    /// Uses the block decomposition whenever the density is zonal.
    pub fn new(density: &DensitySpec, ell_cut: usize) -> Result<Self> {
        if density.is_zonal() {
            Self::zonal(density, ell_cut)
        } else {
            Self::general(density, ell_cut)
        }
    }

    /// A single block over the whole truncated basis, whatever the density.
    pub fn new_full(density: &DensitySpec, ell_cut: usize) -> Result<Self> {
        Self::general(density, ell_cut)
    }

    fn zonal(density: &DensitySpec, ell_cut: usize) -> Result<Self> {
        let d = density.d;
        let coeffs = density.zonal_coefficients();
        let l_max = coeffs.len().saturating_sub(1).max(1);
        let zc = ZonalCouplings::new(d, ell_cut, l_max)?;
        let blocks: Vec<Block> = (0..=ell_cut)
            .into_par_iter()
            .map(|m2| {
                let w = zc.block(m2);
                let size = w.len();
                let rows = (0..size)
                    .map(|i| {
                        let lo = i.saturating_sub(l_max);
                        let hi = (i + l_max).min(size - 1);
                        (lo..=hi)
                            .filter_map(|j| {
                                let mut v = Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0);
                                for (big_l, c) in coeffs.iter().enumerate().skip(1) {
                                    v += c * w[i][j][big_l];
                                }
                                (v != Complex64::new(0.0, 0.0)).then_some((j, v))
                            })
                            .collect()
                    })
                    .collect();
                Block {
                    label: m2,
                    multiplicity: block_multiplicity(d, m2) as f64,
                    ells: (m2..=ell_cut).collect(),
                    rows,
                }
            })
            .collect();
        let mut sigma = vec![Complex64::new(0.0, 0.0); ell_cut + 1];
        sigma[0] = Complex64::new(sphere_volume(d).sqrt(), 0.0);
        for (l, c) in coeffs.iter().enumerate().skip(1) {
            sigma[l] = *c;
        }
        Ok(CoefficientOperator { d, ell_cut, blocks, anchor: 0, sigma })
    }

    fn general(density: &DensitySpec, ell_cut: usize) -> Result<Self> {
        let d = density.d;
        let basis = truncated_indices(d, ell_cut);
        let position: std::collections::HashMap<&HarmonicIndex, usize> =
            basis.iter().enumerate().map(|(k, i)| (i, k)).collect();
        let rows: Vec<Vec<(usize, Complex64)>> = basis
            .par_iter()
            .enumerate()
            .map(|(a, ia)| -> Result<Vec<(usize, Complex64)>> {
                let mut row: Vec<(usize, Complex64)> = vec![(a, Complex64::new(1.0, 0.0))];
                for (b, ib) in basis.iter().enumerate() {
                    let mut v = Complex64::new(0.0, 0.0);
                    for (ic, c) in &density.coeffs {
                        if ia.ell.abs_diff(ib.ell) > ic.ell || !selection_rules_hold(ia, ib, ic) {
                            continue;
                        }
                        v += c * coupling_w(ia, ib, ic)?;
                    }
                    if v != Complex64::new(0.0, 0.0) {
                        if b == a {
                            row[0].1 += v;
                        } else {
                            row.push((b, v));
                        }
                    }
                }
                row.sort_by_key(|&(j, _)| j);
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut sigma = vec![Complex64::new(0.0, 0.0); basis.len()];
        sigma[0] = Complex64::new(sphere_volume(d).sqrt(), 0.0);
        for (i, c) in &density.coeffs {
            sigma[position[i]] = *c;
        }
        let ells = basis.iter().map(|i| i.ell).collect();
        Ok(CoefficientOperator {
            d,
            ell_cut,
            blocks: vec![Block { label: 0, multiplicity: 1.0, ells, rows }],
            anchor: 0,
            sigma,
        })
    }

    pub fn anchor_block(&self) -> &Block {
        &self.blocks[self.anchor]
    }

    /// Contributions to Tr(D₁ S D₂ S ⋯ D_p S), bucketed by the largest degree
    /// visited. `weights[f][ℓ]` is the diagonal of D_f at degree ℓ.
    pub fn cycle_trace_buckets(&self, weights: &[Vec<f64>]) -> Vec<f64> {
        let p = weights.len();
        assert!(p >= 1, "trace needs at least one factor");
        let cut = self.ell_cut;
        self.blocks
            .par_iter()
            .map(|block| {
                let mut buckets = vec![0.0; cut + 1];
                let mut path = Vec::with_capacity(p);
                for start in 0..block.len() {
                    let w0 = weights[0][block.ells[start]];
                    if w0 == 0.0 {
                        continue;
                    }
                    path.clear();
                    path.push(start);
                    walk(block, weights, &mut path, Complex64::new(w0, 0.0), &mut buckets);
                }
                for b in buckets.iter_mut() {
                    *b *= block.multiplicity;
                }
                buckets
            })
            .reduce(
                || vec![0.0; cut + 1],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    }
}

fn walk(block: &Block, weights: &[Vec<f64>], path: &mut Vec<usize>, acc: Complex64, buckets: &mut [f64]) {
    let cur = *path.last().unwrap();
    if path.len() == weights.len() {
        let close = block.entry(cur, path[0]);
        if close == Complex64::new(0.0, 0.0) {
            return;
        }
        let top = path.iter().map(|&k| block.ells[k]).max().unwrap();
        buckets[top] += (acc * close).re;
        return;
    }
    let wf = &weights[path.len()];
    for &(next, s) in &block.rows[cur] {
        let w = wf[block.ells[next]];
        if w == 0.0 {
            continue;
        }
        path.push(next);
        walk(block, weights, path, acc * s * w, buckets);
        path.pop();
    }
}
