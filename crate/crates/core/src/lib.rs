//! Third-order tensor attention: the forward map, its exact gradient, and a
//! near-linear-time approximate gradient built from low-rank factors.
//!
//! The attention matrix `D⁻¹ exp(A1 X (A2 ⊗ A3)ᵀ / d)` has `n x n²` entries
//! (one per query and key pair). [`exact`] forms it densely; [`fast`] keeps
//! every such matrix as three `n x k` factors.

pub mod bench;
pub mod clock;
pub mod error;
pub mod exact;
pub mod fast;
pub mod format;
pub mod hardness;
pub mod instance;
pub mod kron;
pub mod limits;
pub mod lowrank;
pub mod matrix;
mod par;

pub use error::{Result, TatError};
pub use fast::{grad_fast, grad_fast_with_range, FastGradientReport};
pub use instance::AttnInstance;
pub use limits::Limits;
pub use lowrank::{build_f_factors, build_f_factors_with_range, ForwardFactors, LowRankTriple};
pub use matrix::{Matrix, Tensor3};
