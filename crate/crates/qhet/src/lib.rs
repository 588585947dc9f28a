//! Heterogeneity analysis for random-effects meta-analysis of mean differences.
//!
//! The central object is the generalized Q statistic with *constant* weights,
//! in particular effective-sample-size (SW) weights, as an alternative to the
//! classical Cochran Q with estimated inverse-variance (IV) weights. The crate
//! provides:
//!
//! - domain types and weight schemes for the random-effects model ([`meta`]);
//! - exact first three moments of Q under that model ([`moments`]);
//! - six evaluatable approximations to the distribution of Q, including the
//!   exact weighted-chi-square law for mean differences ([`qdist`]);
//! - point estimators of the between-study variance τ² ([`tau`]);
//! - a deterministic parallel Monte Carlo engine for level, power, and bias
//!   experiments ([`sim`]);
//! - the self-contained special functions and solvers all of the above need
//!   ([`numerics`]).
//!
//! All types are immutable after construction and the computational routines
//! are pure functions, so everything is safe to share across threads.

// Numerical code idioms: `!(x > 0.0)` rejects NaN along with the domain
// violation, published coefficient tables keep their full digits, and
// the multi-array power-sum loops read better indexed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod meta;
pub mod moments;
pub mod numerics;
pub mod qdist;
pub mod sim;
pub mod tau;

pub use error::Error;
pub use meta::{ModelState, StudySummary, WeightKind, WeightScheme};
pub use moments::{QMoments, UnconditionalMoments};
pub use qdist::QDistribution;
pub use tau::{TauEstimate, TauMethod};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
