//! Simulation and analysis of one-dimensional McKean-Vlasov SIS epidemic models.
//!
//! The crate is organised in six modules:
//!
//! * [`model`] defines polynomial-drift McKean-Vlasov models, the tractable
//!   class, the representative SIS family and its presets.
//! * [`measures`] provides uniform empirical measures, the clipping pushforward
//!   and one-dimensional Wasserstein distances.
//! * [`engine`] runs the interacting-particle Euler-Maruyama scheme with a
//!   counter-based Brownian driver and coupled parameter sweeps.
//! * [`asymptotics`] contains the closed-form maximisers and zeros for sums of
//!   power functions, the transformed function `h`, and extinction and
//!   persistence diagnostics.
//! * [`bounds`] evaluates the explicit moment, comparison and strong error
//!   bounds.
//! * [`harness`] parses experiment configurations, runs experiments and writes
//!   CSV and report files.

// Negated float comparisons deliberately reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bounds;
pub mod engine;
mod error;
pub mod harness;
pub mod measures;
pub mod model;
pub mod quadrature;

pub use error::{Error, Result};
