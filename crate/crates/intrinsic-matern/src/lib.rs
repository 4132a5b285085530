//! Sparse finite-element engine for intrinsic Whittle–Matérn random fields.
//!
//! The field solves `(−Δ)^{β/2}(κ²−Δ)^{α/2}(τu) = W` with Neumann boundary
//! conditions. It is discretized with lumped linear finite elements and, for
//! fractional exponents, a rational approximation that splits the field into
//! a sum of independent sparse intrinsic GMRF blocks. On top of the
//! discretization sit Gaussian likelihood inference, kriging, and the
//! Brown–Resnick / Hüsler–Reiss extremes model generated by the field.

pub mod cli;
pub mod convergence;
pub mod extremes;
pub mod fem;
pub mod igmrf;
pub mod inference;
pub mod kriging;
pub mod mesh;
mod quad;
pub mod rational;
pub mod sparse_core;
pub mod special;
pub mod variogram;
