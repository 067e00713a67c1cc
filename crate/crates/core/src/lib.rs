//! Low-rank approximation of matrices observed through full column
//! samples, using polynomial side information to recover the row space.
//!
//! The crate provides:
//!
//! - dense matrix arithmetic with two independent SVD paths
//!   ([`matrix`], [`svd`]);
//! - column samplers and entry index sets ([`sampling`]);
//! - the polynomial basis builder ([`polybasis`]);
//! - the three-stage quasi-polynomial solver ([`qpma`]);
//! - a CUR+-style baseline that also samples rows and extra entries
//!   ([`curplus`]);
//! - diagnostics that evaluate incoherence, singular-value gaps,
//!   subspace residuals and spectral error bounds ([`theory`]);
//! - synthetic instance generation and CSV ingestion ([`datagen`]);
//! - evaluation metrics ([`metrics`]).

pub mod curplus;
pub mod datagen;
mod descent;
pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod polybasis;
pub mod qpma;
pub mod rng;
pub mod sampling;
pub mod svd;
pub mod theory;
pub mod tol;

pub use descent::DescentOutcome;
pub use error::{Error, Result};
pub use matrix::{projector, DenseMatrix};
pub use svd::SvdFactors;
