//! Series evaluation of the CDF of a central weighted sum of chi-square
//! variables, P(Σ λ_r χ²_{h_r} <= x).
//!
//! The law is expanded as a mixture of central chi-square distributions
//! with the scale β fixed at the smallest eigenvalue, so every mixture
//! coefficient is nonnegative and the coefficients sum to one. That makes
//! the truncation error after N terms rigorously bounded by the missing
//! mass 1 − Σ_{k<=N} c_k, which is driven below the requested tolerance
//! before the series stops.

use crate::error::Error;
use crate::numerics::{gamma_q_unchecked, ln_gamma_unchecked};
use crate::Result;

/// Relative eigenvalue threshold below which a value is treated as the
/// structural zero of the rank-(K−1) form.
const DROP_TOL: f64 = 1e-9;
/// Eigenvalues within this relative distance are merged into one term
/// with a multiplicity.
const MERGE_TOL: f64 = 1e-8;
/// Default rigorous truncation bound on the series tail.
const SERIES_TOL: f64 = 1e-9;
/// Hard cap on series length; convergence needs roughly
/// ln(1/tol)·λ_max/λ_min terms, so this covers eigenvalue spreads past 1e5.
const MAX_TERMS: usize = 5_000_000;

/// A central weighted-chi-square law with distinct positive eigenvalues
/// and their multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedChiSquare {
    lambdas: Vec<f64>,
    multiplicities: Vec<usize>,
    total_df: usize,
}

impl WeightedChiSquare {
    /// Build from raw eigenvalues of the covariance-congruent form.
    ///
    /// Values below `DROP_TOL`·λ_max in magnitude are dropped as the
    /// structural zero; a materially negative eigenvalue is an error.
    /// Clustered eigenvalues are merged into multiplicities.
    pub fn from_eigenvalues(eigenvalues: &[f64]) -> Result<Self> {
        let lambda_max = eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
        if !(lambda_max > 0.0) {
            return Err(Error::DegenerateMoments {
                reason: "all eigenvalues vanish; Q is degenerate at 0".into(),
            });
        }
        let tolerance = DROP_TOL * lambda_max;
        let mut kept: Vec<f64> = Vec::with_capacity(eigenvalues.len());
        for &v in eigenvalues {
            if v < -tolerance {
                return Err(Error::NotPsd { value: v, tolerance });
            }
            if v.abs() >= tolerance {
                kept.push(v);
            }
        }
        kept.sort_by(|a, b| b.partial_cmp(a).unwrap());

        let mut lambdas = Vec::new();
        let mut multiplicities = Vec::new();
        let mut cluster_start = 0;
        for i in 1..=kept.len() {
            let closes_cluster =
                i == kept.len() || (kept[cluster_start] - kept[i]) > MERGE_TOL * kept[cluster_start];
            if closes_cluster {
                let members = &kept[cluster_start..i];
                lambdas.push(members.iter().sum::<f64>() / members.len() as f64);
                multiplicities.push(members.len());
                cluster_start = i;
            }
        }
        let total_df = multiplicities.iter().sum();
        Ok(WeightedChiSquare { lambdas, multiplicities, total_df })
    }

    /// Distinct eigenvalues, descending.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// Number of retained chi-square components, Σ h_r.
    pub fn total_df(&self) -> usize {
        self.total_df
    }

    /// Mean Σ λ_r h_r of the law.
    pub fn mean(&self) -> f64 {
        self.lambdas
            .iter()
            .zip(&self.multiplicities)
            .map(|(&l, &h)| l * h as f64)
            .sum()
    }

    /// Upper tail P(Q > x) with the default 1e-9 truncation bound.
    pub fn survival(&self, x: f64) -> Result<f64> {
        self.survival_with_tolerance(x, SERIES_TOL)
    }

    /// Upper tail with an explicit truncation bound.
    pub fn survival_with_tolerance(&self, x: f64, tol: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(1.0);
        }
        let beta = *self.lambdas.last().expect("nonempty by construction");

        // Single distinct eigenvalue: the law is exactly β·χ²_ρ.
        if self.lambdas.len() == 1 {
            return Ok(gamma_q_unchecked(self.total_df as f64 / 2.0, x / (2.0 * beta)));
        }

        let gammas: Vec<f64> = self.lambdas.iter().map(|&l| 1.0 - beta / l).collect();
        let halves: Vec<f64> = self.multiplicities.iter().map(|&h| h as f64 / 2.0).collect();

        // c_0 = Π (β/λ_r)^{h_r/2}.
        let ln_c0: f64 = self
            .lambdas
            .iter()
            .zip(&halves)
            .map(|(&l, &half)| half * (beta / l).ln())
            .sum();
        let c0 = ln_c0.exp();
        if c0 == 0.0 {
            return Err(Error::NonConvergence {
                solver: "weighted_chi2_series",
                iterations: 0,
                residual: ln_c0,
            });
        }

        let z = x / (2.0 * beta);
        let a0 = self.total_df as f64 / 2.0;
        // Survival of χ²_{ρ+2k} at x/β, advanced by the ascending recurrence
        // Q(a+1, z) = Q(a, z) + z^a e^{-z} / Γ(a+1). The increment is carried
        // in log space: for z ≫ ρ it starts far below the subnormal range
        // and only becomes representable once k approaches z.
        let mut chi_sf = gamma_q_unchecked(a0, z);
        let ln_z = z.ln();
        let mut ln_increment = a0 * ln_z - z - ln_gamma_unchecked(a0 + 1.0);

        // Mixture coefficients via c_k = (1/(2k)) Σ_r h_r A_r(k),
        // A_r(k) = Σ_{j<k} γ_r^{k-j} c_j, updated as A_r <- γ_r (A_r + c_{k-1}).
        let mut acc = vec![0.0f64; self.lambdas.len()];
        let mut c = c0;
        let mut mass = c0;
        let mut survival = c0 * chi_sf;

        for k in 1..=MAX_TERMS {
            if 1.0 - mass <= tol {
                return Ok(survival.clamp(0.0, 1.0));
            }
            for (a, &g) in acc.iter_mut().zip(&gammas) {
                *a = g * (*a + c);
            }
            c = acc
                .iter()
                .zip(&halves)
                .map(|(&a, &half)| half * a)
                .sum::<f64>()
                / k as f64;
            chi_sf += ln_increment.exp();
            ln_increment += ln_z - (a0 + k as f64).ln();
            survival += c * chi_sf;
            mass += c;
        }

        Err(Error::NonConvergence {
            solver: "weighted_chi2_series",
            iterations: MAX_TERMS,
            residual: 1.0 - mass,
        })
    }

    /// Lower tail P(Q <= x).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.survival(x)?)
    }
}
