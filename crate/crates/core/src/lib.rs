//! Spectra of inner-product and Hermite kernels on anisotropic power-law
//! Gaussian data, and kernel ridge regression experiments built on them.

pub mod basis;
pub mod covariance;
pub mod error;
pub mod experiment;
pub mod hermite;
pub mod krr;
pub mod multiindex;
pub mod smoothcount;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
