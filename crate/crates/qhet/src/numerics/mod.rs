//! Self-contained special functions, a dense symmetric eigensolver, and
//! root/system solvers.
//!
//! Everything here is in-repo by design: the distribution work downstream
//! must be auditable end to end, so no external numerical libraries are
//! used. Each routine is pinned by oracle tests against independent
//! references (quadrature, bisection on the characteristic polynomial,
//! grid scans).

mod beta;
mod eigen;
mod gamma;
mod normal;
mod roots;

pub use beta::{f_cdf, f_sf, regularized_incomplete_beta};
pub use eigen::{symmetric_eigenvalues, Matrix};
pub use gamma::{chi2_cdf, chi2_sf, ln_gamma, regularized_gamma_lower, regularized_gamma_upper};
pub(crate) use gamma::{gamma_q_unchecked, ln_gamma_unchecked};
pub use normal::{inverse_normal_cdf, normal_cdf};
pub use roots::{brent_root, newton_2d, SolveReport};

/// Default absolute tolerance for CDF evaluations.
pub const CDF_TOL: f64 = 1e-10;

/// Default tolerance for the root and system solvers.
pub const SOLVER_TOL: f64 = 1e-10;
