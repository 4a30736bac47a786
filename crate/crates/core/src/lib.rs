//! Renormalized spectral sum rules for the weighted Laplacian on S^d.

pub mod error;
pub mod harmonics;
pub mod quadrature;
pub mod special;
pub mod summation;
pub mod density;
pub mod operator;
pub mod sumrules;
pub mod greens;
pub mod rayleigh_ritz;
pub mod weyl;
pub mod validate;

pub use error::{Error, Result};
