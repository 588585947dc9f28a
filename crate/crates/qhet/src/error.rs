//! Error type shared by all modules.

use thiserror::Error;

/// Errors reported by the statistical and numerical routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A study list was empty where at least one study is required.
    #[error("no studies")]
    NoStudies,

    /// Fewer studies than an operation supports.
    #[error("need at least {required} studies, got {actual}")]
    TooFewStudies { required: usize, actual: usize },

    /// A study violated a `StudySummary` invariant.
    #[error("invalid study {index}: {reason}")]
    InvalidStudy { index: usize, reason: String },

    /// Vector lengths of paired inputs disagree.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A weight or variance that must be positive was not.
    #[error("nonpositive {what} at index {index}: {value}")]
    NonPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },

    /// An argument left the mathematical domain of a special function.
    #[error("domain error in {function}: {reason}")]
    Domain {
        function: &'static str,
        reason: String,
    },

    /// A matrix expected to be symmetric was not.
    #[error("matrix not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {deviation}")]
    NotSymmetric { i: usize, j: usize, deviation: f64 },

    /// The covariance-congruent form had a materially negative eigenvalue.
    #[error("Σ not PSD: eigenvalue {value} below tolerance {tolerance}")]
    NotPsd { value: f64, tolerance: f64 },

    /// A root bracket did not contain a sign change.
    #[error("bracket invalid: f({lo}) = {f_lo}, f({hi}) = {f_hi} have the same sign")]
    BracketInvalid {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    /// An iterative solver did not converge within its iteration budget.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Moments passed to a moment-matching fit were degenerate.
    #[error("degenerate moments: {reason}")]
    DegenerateMoments { reason: String },

    /// The three-moment fit failed; callers fall back or record a missing value.
    #[error("M3 breakdown: {detail}")]
    M3Breakdown { detail: String },

    /// A cross-moment table entry required by the general moment assembly is absent.
    #[error("missing cross-moment expectation for (r, j) = ({r}, {j})")]
    MissingCrossMoment { r: usize, j: usize },

    /// A named simulation size pattern is not one of the known ones.
    #[error("unknown pattern: {0}")]
    UnknownPattern(String),

    /// A scenario parameter produced an invalid study configuration.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
