//! Core numerics for large-dimensional product kernel ridge regression.
//!
//! The crate is `no_std` + `alloc`: everything here is pure computation over
//! `f64`, so it can be embedded anywhere. IO, file formats, experiment
//! orchestration, and the CLI live in the companion `krrlab` crate.
//!
//! Modules:
//! - [`specfun`]: Hermite/Laguerre recurrences and the modified Bessel
//!   function of the first kind, including log-scaled variants.
//! - [`kernels`]: one-dimensional base kernels with explicit Mercer systems,
//!   product-kernel assembly, and product-measure sampling.
//! - [`spectrum`]: staircase spectrum models, the effective-dimension and
//!   bias functionals, asymptotic envelopes, and hypothesis checkers.
//! - [`rates`]: piecewise convergence-rate theory (optimal regularization
//!   schedules, exact and minimax rate exponents, curve generation).
//! - [`krr`]: the kernel ridge regression solver and empirical error /
//!   bias-variance estimators.
//! - [`targets`]: synthetic regression targets that are exactly evaluable
//!   through the kernel's eigensystem.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod kernels;
pub mod krr;
pub mod rates;
pub mod spectrum;
pub mod specfun;
pub mod targets;

mod util;

pub use util::KahanSum;
