//! Riemannian geometry engine for the σ₂-curvature functional
//! `H_ḡ(g) = Vol(g)^{4/n} ∫ σ₂(g) dv_ḡ` around Einstein backgrounds.
//!
//! Two independent backends:
//!
//! * [`homogeneous`]: exact rational-function formulas along products of
//!   round spheres with per-factor scale functions of `t`.
//! * [`chart`] + [`quadrature`]: finite-difference curvature from coordinate
//!   charts and spectral quadrature over built-in manifolds.
//!
//! [`variation`] cross-checks closed-form first and second variations
//! against numeric differentiation along metric paths.

pub mod chart;
pub mod exact;
pub mod homogeneous;
pub mod quadrature;
pub mod registry;
pub mod spectral;
pub mod variation;
