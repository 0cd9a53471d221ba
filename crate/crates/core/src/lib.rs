//! Numerical laboratory for rough singular integral operators.
//!
//! The crate samples rough kernels `Ω(x-y) K(x,y)` on uniform grids, checks
//! their size and regularity constants, performs dyadic Calderón–Zygmund
//! decompositions, builds the direction nets and multipliers of the
//! microlocal decomposition, and probes weak-(1,1) behaviour empirically.

pub mod config;
pub mod czd;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod kernel_zoo;
pub mod microlocal;
pub mod operator;
pub mod probe;
pub mod selftest;
pub mod sphere_fn;

pub use error::{Error, Result};
