//! Error types shared across the crate.
//!
//! Every rejected input maps to its own variant so callers (CLI, C API,
//! tests) can tell apart bad problem data, solver breakdown, and I/O.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Denominator polynomial is identically zero.
    #[error("denominator polynomial is zero")]
    ZeroDenominator,

    /// A plant must be proper: numerator degree must not exceed denominator degree.
    #[error("plant is improper: numerator degree {num_deg} exceeds denominator degree {den_deg}")]
    ImproperPlant { num_deg: usize, den_deg: usize },

    /// The reference transform must be strictly proper (decay at infinity).
    #[error("reference transform is not strictly proper (numerator degree {num_deg}, denominator degree {den_deg})")]
    ReferenceNotStrictlyProper { num_deg: usize, den_deg: usize },

    /// Interpolation points on (or numerically near) the imaginary axis are excluded.
    #[error("{role} {re}+{im}i lies within tolerance of the imaginary axis")]
    PointOnImaginaryAxis { role: &'static str, re: f64, im: f64 },

    /// All right-half-plane interpolation points must be simple.
    #[error("{role} {re}+{im}i is repeated (multiplicity {multiplicity}); only simple points are supported")]
    RepeatedPoint {
        role: &'static str,
        re: f64,
        im: f64,
        multiplicity: usize,
    },

    /// Two interpolation points coincide within the distinctness tolerance.
    #[error("interpolation points coincide: {role_a} {a_re}+{a_im}i and {role_b} {b_re}+{b_im}i")]
    CoincidentPoints {
        role_a: &'static str,
        a_re: f64,
        a_im: f64,
        role_b: &'static str,
        b_re: f64,
        b_im: f64,
    },

    /// The reference transform has a pole at (or near) an interpolation point,
    /// so the interpolation data would be undefined.
    #[error("reference transform has a pole at interpolation point {re}+{im}i")]
    ReferencePoleAtPoint { re: f64, im: f64 },

    /// Evaluation of a rational function too close to one of its poles.
    #[error("rational function evaluated within tolerance of a pole at {re}+{im}i")]
    EvalNearPole { re: f64, im: f64 },

    /// Relative degree of the reference exceeds one but the reference does not
    /// start flat enough at t = 0, so no feasible error signal exists.
    #[error("infeasible problem: reference derivative of order {order} at t=0+ is {value}, must vanish")]
    InfeasibleReferenceStart { order: usize, value: f64 },

    /// Undershoot analysis requires a nonnegative reference signal.
    #[error("undershoot criterion disabled: reference signal is negative (w({t}) = {value})")]
    ReferenceNegative { t: f64, value: f64 },

    /// Envelope data is malformed (empty breakpoints, unsorted, bad horizon).
    #[error("invalid envelope: {reason}")]
    EnvelopeInvalid { reason: String },

    /// Envelope bounds contradict the forced initial error value.
    #[error("envelope incompatible with initial error value {alpha}: requires upper(0) > {alpha} >= max(lower(0), 0)")]
    EnvelopeExcludesStart { alpha: f64 },

    /// Mode-set reduction requested for a problem it does not apply to.
    #[error("reduction by the dominant real decay applies only to overshoot/undershoot with a minimum-phase reference")]
    ReductionNotApplicable,

    /// Polynomial root iteration failed to converge after all restarts.
    #[error("root finding did not converge for degree-{degree} polynomial")]
    RootsDidNotConverge { degree: usize },

    /// Partial fractions / roots of a constant polynomial are undefined.
    #[error("operation requires polynomial degree >= 1")]
    DegreeTooSmall,

    /// First-order formulas need one real unstable pole strictly left of one real zero.
    #[error("first-order formulas require a real zero z > real pole p > 0 (got z = {z}, p = {p})")]
    FirstOrderOutOfRange { z: f64, p: f64 },

    /// Linear program has no feasible point.
    #[error("linear program infeasible (phase-1 residual {residual:.3e})")]
    LpInfeasible { residual: f64 },

    /// Linear program is unbounded in the objective direction.
    #[error("linear program unbounded")]
    LpUnbounded,

    /// Simplex iteration limit hit.
    #[error("simplex iteration limit reached ({iterations} iterations)")]
    LpIterationLimit { iterations: usize },

    /// Grid refinement stopped improving before meeting the tolerance.
    #[error("{context}: refinement did not converge (last values {previous} -> {current})")]
    NoConvergence {
        context: &'static str,
        previous: f64,
        current: f64,
    },

    /// Time horizon grew past its cap while the problem stayed infeasible.
    #[error("signal horizon exceeded {horizon} without reaching feasibility")]
    HorizonExhausted { horizon: f64 },

    /// Malformed job configuration.
    #[error("invalid configuration: {reason}")]
    BadConfig { reason: String },

    /// Unknown criterion name in a configuration or CLI flag.
    #[error("unknown criterion '{name}' (expected one of ma, pos, os, us, fl)")]
    UnknownCriterion { name: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the problem description rather than by
    /// solver breakdown; drives the process exit code split.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::RootsDidNotConverge { .. }
                | Error::LpInfeasible { .. }
                | Error::LpUnbounded
                | Error::LpIterationLimit { .. }
                | Error::NoConvergence { .. }
                | Error::HorizonExhausted { .. }
        )
    }
}
