//! Positive densities Σ(Ω) = 1 + Σ c_{ℓ,m⃗} Y_{ℓ,m⃗}(Ω) on S^d.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{eval_harmonic, HarmonicIndex};
use crate::special::sphere_volume;

/// One record of a coefficient file: `{"ell": 1, "m": [0, 0], "re": 0.5, "im": 0.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffRecord {
    pub ell: usize,
    pub m: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    pub d: usize,
    pub coeffs: BTreeMap<HarmonicIndex, Complex64>,
    pub zonal_kappa: Option<f64>,
}

/// Largest |κ| for which 1 + κY_{1,0⃗} stays positive.
pub fn positivity_bound(d: usize) -> f64 {
    (sphere_volume(d) / (d as f64 + 1.0)).sqrt()
}

const REALITY_TOL: f64 = 1e-12;

impl DensitySpec {
    pub fn uniform(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("sphere dimension must be at least 2, got {d}")));
        }
        Ok(DensitySpec { d, coeffs: BTreeMap::new(), zonal_kappa: Some(0.0) })
    }

    /// Σ = 1 + κ Y_{1,0⃗}.
    pub fn linear(d: usize, kappa: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("sphere dimension must be at least 2, got {d}")));
        }
        let bound = positivity_bound(d);
        if !kappa.is_finite() || kappa.abs() >= bound {
            return Err(Error::PositivityViolated { kappa: kappa.abs(), bound });
        }
        let mut coeffs = BTreeMap::new();
        if kappa != 0.0 {
            coeffs.insert(HarmonicIndex::zonal(d, 1), Complex64::new(kappa, 0.0));
        }
        Ok(DensitySpec { d, coeffs, zonal_kappa: Some(kappa) })
    }

    /// General density from explicit coefficients; validates indices, reality
    /// and positivity on a sample grid.
    pub fn from_coeffs(d: usize, coeffs: BTreeMap<HarmonicIndex, Complex64>) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("sphere dimension must be at least 2, got {d}")));
        }
        for idx in coeffs.keys() {
            if idx.d != d {
                return Err(Error::MixedDimensions(d, idx.d));
            }
            idx.validate()?;
            if idx.ell == 0 {
                return Err(Error::Domain(
                    "the constant part of the density is fixed to 1; drop the l = 0 coefficient".into(),
                ));
            }
        }
        let coeffs: BTreeMap<_, _> = coeffs.into_iter().filter(|(_, c)| c.norm() > 0.0).collect();
        let spec = DensitySpec { d, coeffs, zonal_kappa: None };
        spec.check_reality()?;
        spec.check_positivity()?;
        Ok(spec)
    }

    pub fn from_records(d: usize, records: &[CoeffRecord]) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for r in records {
            let idx = HarmonicIndex::new(d, r.ell, r.m.clone())?;
            *coeffs.entry(idx).or_insert(Complex64::new(0.0, 0.0)) += Complex64::new(r.re, r.im);
        }
        Self::from_coeffs(d, coeffs)
    }

    pub fn from_json(d: usize, text: &str) -> Result<Self> {
        let records: Vec<CoeffRecord> = serde_json::from_str(text)
            .map_err(|e| Error::Domain(format!("malformed coefficient file: {e}")))?;
        Self::from_records(d, &records)
    }

    pub fn to_records(&self) -> Vec<CoeffRecord> {
        self.coeffs
            .iter()
            .map(|(i, c)| CoeffRecord { ell: i.ell, m: i.m.clone(), re: c.re, im: c.im })
            .collect()
    }

    fn coefficient(&self, idx: &HarmonicIndex) -> Complex64 {
        self.coeffs.get(idx).copied().unwrap_or_default()
    }

    /// c_{ℓ,…,−m_d} = (−1)^{m_d} conj(c_{ℓ,…,m_d}) for every stored coefficient.
    fn check_reality(&self) -> Result<()> {
        for (idx, &c) in &self.coeffs {
            let md = idx.m_last();
            let mut mirror = idx.clone();
            *mirror.m.last_mut().unwrap() = -md;
            let sign = if md.rem_euclid(2) == 1 { -1.0 } else { 1.0 };
            let expected = c.conj() * sign;
            if (self.coefficient(&mirror) - expected).norm() > REALITY_TOL * (1.0 + c.norm()) {
                return Err(Error::NonRealDensity(format!(
                    "coefficient at {idx} has no matching conjugate partner at {mirror}"
                )));
            }
        }
        Ok(())
    }

    /// Σ sampled on a product grid of at least 10³ points.
    fn check_positivity(&self) -> Result<()> {
        if let Some(k) = self.zonal_kappa {
            let bound = positivity_bound(self.d);
            if k.abs() >= bound {
                return Err(Error::PositivityViolated { kappa: k.abs(), bound });
            }
            return Ok(());
        }
        let min = self.sample_minimum();
        if min <= 0.0 {
            return Err(Error::NonPositiveDensity(min));
        }
        Ok(())
    }

    /// Smallest value of Σ on the validation grid.
    pub fn sample_minimum(&self) -> f64 {
        let d = self.d;
        let per_axis = (1000f64.powf(1.0 / d as f64).ceil() as usize).max(8) + 2;
        let mut min = f64::INFINITY;
        let mut counter = vec![0usize; d];
        let mut omega = vec![0.0; d];
        loop {
            for k in 0..d {
                omega[k] = if k + 1 == d {
                    2.0 * std::f64::consts::PI * counter[k] as f64 / per_axis as f64
                } else {
                    std::f64::consts::PI * counter[k] as f64 / (per_axis - 1) as f64
                };
            }
            min = min.min(self.evaluate(&omega));
            let mut k = 0;
            loop {
                if k == d {
                    return min;
                }
                counter[k] += 1;
                if counter[k] < per_axis {
                    break;
                }
                counter[k] = 0;
                k += 1;
            }
        }
    }

    /// Σ(Ω) (real part; the imaginary part vanishes for a valid density).
    pub fn evaluate(&self, omega: &[f64]) -> f64 {
        1.0 + self
            .coeffs
            .iter()
            .map(|(i, c)| (c * eval_harmonic(i, omega).expect("validated index")).re)
            .sum::<f64>()
    }

    pub fn max_ell(&self) -> usize {
        self.coeffs.keys().map(|i| i.ell).max().unwrap_or(0)
    }

    pub fn is_zonal(&self) -> bool {
        self.coeffs.keys().all(|i| i.is_zonal())
    }

    pub fn is_uniform(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Σ as a function of θ₁ alone, for zonal densities.
    pub fn zonal_profile(&self, theta: f64) -> f64 {
        let mut omega = vec![0.0; self.d];
        omega[0] = theta;
        self.evaluate(&omega)
    }

    /// Coefficients c_L of a zonal density, indexed by L.
    pub fn zonal_coefficients(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.max_ell() + 1];
        for (i, c) in &self.coeffs {
            if i.is_zonal() {
                out[i.ell] += c;
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        sphere_volume(self.d)
    }
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.zonal_kappa {
            Some(k) => write!(f, "kappa={k}"),
            None => write!(f, "coeffs[{}]", self.coeffs.len()),
        }
    }
}
