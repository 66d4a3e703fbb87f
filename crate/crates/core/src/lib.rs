//! Multistatic coprime-array MIMO radar target localization through a
//! coupled canonical polyadic decomposition computed by joint eigenvalue
//! decomposition.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense complex tensors, unfoldings, Khatri-Rao products.
//! - [`linalg`]: SVD, pseudo-inverse, rank-1 approximation, (generalized)
//!   eigendecomposition.
//! - [`geometry`]: coprime L-shaped and planar sensor sets, steering matrices.
//! - [`sim`]: scenes, probing waveforms, Swerling-II reflections, noise.
//! - [`ccpd`]: dimensionality reduction, target matrices, J-EVD, factor
//!   recovery and coupled ALS.
//! - [`localization`]: generator extraction, coprime disambiguation, line
//!   fusion and angular error.
//! - [`bench`]: Monte-Carlo experiment presets, runner and result output.

pub mod bench;
pub mod ccpd;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod localization;
pub mod matching;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
pub use nalgebra::Complex;

pub type Complex64 = Complex<f64>;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
