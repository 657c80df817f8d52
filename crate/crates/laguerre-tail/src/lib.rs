//! Rare-event analysis for the extreme eigenvalues of the beta-Laguerre
//! ensemble.
//!
//! The crate estimates tail probabilities P(lambda_(1) > p x) and
//! P(lambda_(n) < p y) by importance sampling on the tridiagonal
//! (bidiagonal-factor) matrix model, and cross-checks them against
//! closed-form tail approximations, the large-deviation rate function, and
//! Tracy-Widom approximations.
//!
//! Modules:
//! - [`numerics`]: log-gamma, log-sum-exp, incomplete gamma, square-root
//!   edge quadrature, monotone interpolation
//! - [`ensemble`]: parameter/query types and regime validation
//! - [`sampler`]: bidiagonal model sampling, tridiagonal eigensolver,
//!   tilted exponential draws
//! - [`analytic`]: normalizing constants, tail approximations, the
//!   Marchenko-Pastur law, rate function, Tracy-Widom tables
//! - [`estimators`]: direct Monte Carlo and the importance-sampling
//!   estimators, with deterministic sharded accumulation
//!
//! All replicate loops are data-parallel via rayon when the `parallel`
//! feature (default) is enabled; results are bit-identical across worker
//! counts and the sequential fallback.

pub mod analytic;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod sampler;

pub use ensemble::{EnsembleParams, Regime, Spectrum, TailQuery, TailSide};
pub use error::{Error, Result};
pub use estimators::{run_estimate, run_estimate_sequential, EstimateReport, Method};
