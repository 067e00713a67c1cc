//! Numerical tolerances used across the crate.
//!
//! These are fixed here once so that tests and library code agree on what
//! "orthonormal" or "converged" means.

/// Max entrywise deviation of `B^T B` from the identity for a matrix to
/// count as having orthonormal columns.
pub const TOL_ORTH: f64 = 1e-10;

/// SVD reconstruction tolerance, relative to the Frobenius norm of the
/// input: `‖A − UΣV^T‖_F ≤ TOL_RECON_REL · ‖A‖_F`.
pub const TOL_RECON_REL: f64 = 1e-8;

/// Relative deflation threshold for the iterative SVD paths.
pub const SVD_CONV_REL: f64 = 1e-12;

/// Singular values below `RANK_TOL · σ₁` are treated as zero when a
/// strictly positive rank is required.
pub const RANK_TOL: f64 = 1e-12;

/// Absolute slack allowed when checking that a descent trace is
/// non-increasing; anything larger is reported as divergence.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Relative objective increase that counts as genuine divergence rather
/// than evaluation noise near a plateau.
pub const DIVERGENCE_REL: f64 = 1e-9;

/// Singular values of products of orthonormal matrices may exceed 1 by
/// rounding; overshoot up to this much is clamped before `acos`.
pub const COS_CLAMP: f64 = 1e-12;
