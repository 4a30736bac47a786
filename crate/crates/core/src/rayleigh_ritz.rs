//! Rayleigh–Ritz approximation of the spectrum of −Δψ = EΣψ.
//!
//! In the basis of harmonics with ℓ ≤ ℓ_max the problem becomes A x = E B x,
//! with A = diag(λ_ℓ) and B_ij = ∫ Y*_i Σ Y_j. For a zonal density B splits
//! into blocks labelled by m₂, each of size ℓ_max − m₂ + 1 and standing for
//! g^{(d−1)}_{m₂} identical copies.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::DensitySpec;
use crate::error::{Error, Result};
use crate::harmonics::{eigenvalue, truncated_indices, HarmonicIndex};
use crate::operator::CoefficientOperator;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// N̄ = (d + 2ℓ_max)·(d + ℓ_max − 1)!/(d!·ℓ_max!), the number of harmonics with ℓ ≤ ℓ_max.
pub fn basis_size(d: usize, ell_max: usize) -> u128 {
    let (d, l) = (d as u128, ell_max as u128);
    (d + 2 * l) * binomial(d + l - 1, l) / d
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedBasis {
    pub d: usize,
    pub ell_max: usize,
    pub size: u128,
    pub indices: Vec<HarmonicIndex>,
}

impl TruncatedBasis {
    pub fn new(d: usize, ell_max: usize) -> Self {
        let indices = truncated_indices(d, ell_max);
        TruncatedBasis { d, ell_max, size: indices.len() as u128, indices }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssemblyMode {
    Full,
    #[default]
    ZonalBlocks,
}

/// One diagonal block of the generalized problem.
#[derive(Debug, Clone)]
pub struct ProblemBlock {
    /// m₂ in zonal mode, 0 for the full problem.
    pub label: usize,
    pub multiplicity: u128,
    pub stiffness: Vec<f64>,
    pub overlap: DMatrix<Complex64>,
}

#[derive(Debug, Clone)]
pub struct GeneralizedProblem {
    pub d: usize,
    pub ell_max: usize,
    pub density: String,
    pub mode: AssemblyMode,
    pub blocks: Vec<ProblemBlock>,
}

impl GeneralizedProblem {
    /// Basis dimension counted with block multiplicities.
    pub fn dimension(&self) -> u128 {
        self.blocks.iter().map(|b| b.multiplicity * b.stiffness.len() as u128).sum()
    }
}

pub fn assemble(d: usize, ell_max: usize, density: &DensitySpec, mode: AssemblyMode) -> Result<GeneralizedProblem> {
    if density.d != d {
        return Err(Error::MixedDimensions(d, density.d));
    }
    let op = match mode {
        AssemblyMode::ZonalBlocks => {
            if !density.is_zonal() {
                return Err(Error::Domain("zonal blocks need a density with coefficients only at m = 0".into()));
            }
            CoefficientOperator::new(density, ell_max)?
        }
        AssemblyMode::Full => CoefficientOperator::new_full(density, ell_max)?,
    };
    let blocks = op
        .blocks
        .iter()
        .map(|b| {
            let n = b.len();
            let dense = b.dense(ell_max);
            ProblemBlock {
                label: b.label,
                multiplicity: b.multiplicity as u128,
                stiffness: b.ells.iter().map(|&l| eigenvalue(d, l)).collect(),
                overlap: DMatrix::from_fn(n, n, |i, j| dense[i][j]),
            }
        })
        .collect();
    Ok(GeneralizedProblem { d, ell_max, density: density.to_string(), mode, blocks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub value: f64,
    pub multiplicity: u128,
    pub block: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    pub d: usize,
    pub ell_max: usize,
    pub density: String,
    /// Ascending by value, ties ordered by block label.
    pub levels: Vec<Level>,
    /// Index into `levels` of the zero mode.
    pub zero_mode: usize,
    /// Default number of nonzero levels kept, ⌊N̄/2⌋.
    pub retained_count: u128,
}

impl SpectrumEstimate {
    pub fn total_count(&self) -> u128 {
        self.levels.iter().map(|l| l.multiplicity).sum()
    }

    /// Nonzero levels in ascending order.
    pub fn nonzero_levels(&self) -> impl Iterator<Item = &Level> {
        self.levels.iter().enumerate().filter(move |(i, _)| *i != self.zero_mode).map(|(_, l)| l)
    }

    /// The retained count for a fraction of N̄.
    pub fn retained_for(&self, retain: f64) -> u128 {
        (retain * self.total_count() as f64).floor() as u128
    }
}

impl fmt::Display for SpectrumEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "spectrum(d={}, lmax={}, {}, {} levels)", self.d, self.ell_max, self.density, self.levels.len())
    }
}

fn block_eigenvalues(block: &ProblemBlock) -> Result<Vec<f64>> {
    let n = block.stiffness.len();
    let chol = Cholesky::new(block.overlap.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite(format!(
            "overlap block m2={} is not positive definite; the density is not positive on the subspace",
            block.label
        ))
    })?;
    let linv = chol
        .l()
        .solve_lower_triangular(&DMatrix::<Complex64>::identity(n, n))
        .ok_or_else(|| Error::NotPositiveDefinite(format!("singular Cholesky factor in block {}", block.label)))?;
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        block.stiffness.iter().map(|&v| Complex64::new(v, 0.0)),
    ));
    let c = &linv * a * linv.adjoint();
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(c, 1e-14, 100_000)
        .ok_or_else(|| Error::NoConvergence(format!("eigensolver did not converge in block {}", block.label)))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values)
}

pub fn solve_spectrum(problem: &GeneralizedProblem) -> Result<SpectrumEstimate> {
    let per_block: Vec<Vec<f64>> = problem.blocks.par_iter().map(block_eigenvalues).collect::<Result<_>>()?;
    let mut levels: Vec<Level> = problem
        .blocks
        .iter()
        .zip(&per_block)
        .flat_map(|(b, vals)| vals.iter().map(move |&v| Level { value: v, multiplicity: b.multiplicity, block: b.label }))
        .collect();
    levels.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.block.cmp(&b.block)));
    // the constant mode lives in the anchor block and is its lowest level
    let anchor = problem.blocks[0].label;
    let zero_mode = levels.iter().position(|l| l.block == anchor).expect("anchor block is never empty");
    let total: u128 = levels.iter().map(|l| l.multiplicity).sum();
    Ok(SpectrumEstimate {
        d: problem.d,
        ell_max: problem.ell_max,
        density: problem.density.clone(),
        levels,
        zero_mode,
        retained_count: total / 2,
    })
}

/// Assemble with the fastest admissible mode and solve.
pub fn spectrum(d: usize, ell_max: usize, density: &DensitySpec) -> Result<SpectrumEstimate> {
    let mode = if density.is_zonal() { AssemblyMode::ZonalBlocks } else { AssemblyMode::Full };
    solve_spectrum(&assemble(d, ell_max, density, mode)?)
}

/// Σ_{n=1}^{M} 1/E_nᵖ over the lowest M nonzero eigenvalues, counted with multiplicity.
pub fn partial_sum(spectrum: &SpectrumEstimate, p: usize, count: u128) -> Result<f64> {
    let available = spectrum.total_count() - 1;
    if count > available {
        return Err(Error::Domain(format!(
            "asked for {count} nonzero eigenvalues but only {available} are available"
        )));
    }
    let mut remaining = count;
    let mut sum = 0.0;
    for level in spectrum.nonzero_levels() {
        if remaining == 0 {
            break;
        }
        let take = level.multiplicity.min(remaining);
        sum += take as f64 * level.value.powi(-(p as i32));
        remaining -= take;
    }
    Ok(sum)
}
