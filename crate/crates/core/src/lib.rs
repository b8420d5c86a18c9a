//! Numerical laboratory for the one-dimensional stochastic variational wave
//! equation on the torus, written in Riemann invariants `R = u_t - c(u) u_x`,
//! `S = u_t + c(u) u_x`.
//!
//! The crate is organised bottom-up:
//!
//! * [`speed`]: the wave speed `c(u)` and derived scalar maps.
//! * [`grid`]: periodic grid primitives (mollifier, quadrature, interpolation).
//! * [`noise`]: finite-mode additive forcing and reproducible Gaussian streams.
//! * [`dynamics`]: state, reconstruction of `u`, semi-Lagrangian stepping,
//!   characteristic tracers and explosion detection.
//! * [`diagnostics`]: energy ledger, one-sided bounds, weighted norms and
//!   empirical Young-measure moments.
//! * [`harness`]: configuration, single/ensemble drivers, experiment presets.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod noise;
pub mod speed;

pub use error::{Result, SvwError};
