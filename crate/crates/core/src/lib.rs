//! Coherent states for anharmonic oscillators whose labels follow classical
//! phase-space trajectories.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectrum`]: model Hamiltonians, ladder-operator matrices in the harmonic
//!   basis, truncated diagonalization and normal-order coefficients.
//! - [`phasespace`]: the classical flow of `H((p² + ω²q²)/2)` in the three
//!   conjugate charts `(q, p)`, `(R, Θ)` and `(H, τ)`.
//! - [`coherent`]: state construction over any spectrum, time evolution,
//!   expectation values, uncertainty and recurrence scans.
//! - [`identity`]: Cesàro-averaged resolution of the identity.
//! - [`inversion`]: reconstruction of an even potential from its period
//!   function (Abel inversion) and the `τ(𝒬)` chart.
//!
//! All operations are pure functions of immutable inputs.

pub mod coherent;
pub mod error;
pub mod identity;
pub mod interp;
pub mod inversion;
pub mod phasespace;
pub mod quadrature;
pub mod spectrum;

pub use error::{Error, Result};
pub use spectrum::{EnergySpectrum, ModelKind, ModelParams, Operator, OperatorMatrix};
