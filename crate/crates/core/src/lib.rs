//! Multigrid-accelerated sequential subspace optimisation (SESOP) for 2D
//! elliptic and variational problems, with two-grid Fourier analysis of
//! fixed-stepsize variants.

pub mod analysis;
pub mod baselines;
pub mod error;
pub mod grid;
pub mod hierarchy;
pub mod lfa;
pub mod problems;
pub mod relaxation;
pub mod sesop;
pub mod trace;
pub mod transfer;

pub use error::{Error, Result};
pub use grid::{GridField, ResidualNorm, StencilOp};
