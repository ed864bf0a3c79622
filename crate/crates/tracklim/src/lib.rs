//! Fundamental limits of time-domain tracking performance for lumped SISO
//! feedback loops.
//!
//! Given a plant and a rational reference, any internally stabilizing
//! controller yields a tracking error whose transform interpolates fixed
//! values at the plant's right-half-plane zeros and vanishes at its
//! right-half-plane poles and at the reference's right-half-plane zeros.
//! Those constraints alone bound, from below, the achievable peak measures
//! of the error: maximum amplitude, positive peak, overshoot, undershoot,
//! and fluctuation.
//!
//! This crate computes the exact optimal bounds by solving, for each
//! measure, a small dual optimization over linear combinations of decaying
//! oscillatory modes, with a rigorous a-posteriori feasibility check that
//! turns each reported number into a certified lower bound. A discretized
//! primal (a piecewise-linear error signal subject to the same interpolation
//! constraints) brackets the value from above.

pub mod analytic;
pub mod dual;
pub mod error;
pub mod job;
pub mod lp;
pub mod primal;
pub mod ratfun;
pub mod setup;

pub use error::{Error, Result};
