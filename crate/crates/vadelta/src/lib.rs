//! Delta estimation for large portfolios of variable annuities.
//!
//! Valuing every contract in a portfolio of ~100k variable annuities with
//! Monte Carlo is too slow for intraday hedging. This crate implements the
//! alternative: value a small set of representative contracts by MC and
//! interpolate everyone else. Four interpolators are provided on equal
//! footing — ordinary kriging (spherical or exponential variogram), inverse
//! distance weighting, Gaussian RBF interpolation, and a softmax-weighted
//! network estimator trained with Nesterov's accelerated gradient — together
//! with the MC engine that anchors them and an experiment harness that
//! compares them.
//!
//! Module map:
//! - [`portfolio`]: contract types and seeded generation of the input,
//!   representative, training, and validation portfolios.
//! - [`mortality`]: annual death-probability tables (CSV loadable, with a
//!   Gompertz-Makeham fallback).
//! - [`mc`]: log-normal path simulation, cash-flow projection, and
//!   bump-and-revalue delta with common random numbers.
//! - [`baselines`]: kriging / IDW / RBF interpolators and their two distance
//!   functions.
//! - [`metamodel`]: the softmax network — features, forward pass, NAG
//!   training, stopping machinery, and parameter auto-tuning.
//! - [`harness`]: experiment orchestration, report emission, and the
//!   deterministic seed plumbing behind it.
//!
//! Everything downstream of a seed is deterministic: rerunning any generator,
//! valuation, or training loop with the same seed reproduces its output
//! bit for bit, independent of thread count.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod mc;
pub mod metamodel;
pub mod mortality;
pub mod portfolio;
pub mod seeds;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
