//! Six evaluatable approximations to the distribution of Q.
//!
//! Three apply to Q with constant (sample-size) weights — the exact
//! weighted-chi-square law, and the two- and three-moment chi-square
//! fits — and three to Q with estimated inverse-variance weights: the
//! classical χ²_{K−1}, the Welch heteroscedastic-ANOVA law, and the
//! weighted-chi-square law with the estimated weights treated as
//! constants.

mod farebrother;

pub use farebrother::WeightedChiSquare;

use crate::error::Error;
use crate::meta::{q_form_matrix, ModelState, StudySummary, WeightScheme};
use crate::moments::QMoments;
use crate::numerics::{
    chi2_sf, f_sf, ln_gamma_unchecked, newton_2d, symmetric_eigenvalues, Matrix,
};
use crate::Result;

/// An evaluatable upper-tail function P(Q > x).
#[derive(Debug, Clone, PartialEq)]
pub enum QDistribution {
    /// Exact weighted-chi-square law for constant weights (mean difference).
    FarebrotherSw(WeightedChiSquare),
    /// Two-moment fit Q ≈ c·χ²_p.
    M2Sw { c: f64, p: f64 },
    /// Three-moment fit Q ≈ c·(χ²_p)^r.
    M3Sw { c: f64, p: f64, r: f64 },
    /// The χ²_{K−1} approximation for Q with IV weights.
    ChiSquareIv { df: f64 },
    /// Welch's heteroscedastic-ANOVA law: scale·F(df1, df2).
    WelchIv { scale: f64, df1: f64, df2: f64 },
    /// Biggerstaff–Jackson: the weighted-chi-square law with the estimated
    /// IV weights treated as constants.
    BjIv(WeightedChiSquare),
}

impl QDistribution {
    /// Upper tail P(Q > x).
    pub fn upper_tail(&self, x: f64) -> Result<f64> {
        match self {
            QDistribution::FarebrotherSw(law) | QDistribution::BjIv(law) => law.survival(x),
            QDistribution::M2Sw { c, p } => chi2_sf(x / c, *p),
            QDistribution::M3Sw { c, p, r } => {
                if x <= 0.0 {
                    Ok(1.0)
                } else {
                    chi2_sf((x / c).powf(1.0 / r), *p)
                }
            }
            QDistribution::ChiSquareIv { df } => chi2_sf(x, *df),
            QDistribution::WelchIv { scale, df1, df2 } => f_sf(x / scale, *df1, *df2),
        }
    }

    /// Upper tail over a grid of thresholds.
    pub fn upper_tail_grid(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.upper_tail(x)).collect()
    }

    /// Short stable name used in result tables.
    pub fn kind_name(&self) -> &'static str {
        match self {
            QDistribution::FarebrotherSw(_) => "FSW",
            QDistribution::M2Sw { .. } => "M2SW",
            QDistribution::M3Sw { .. } => "M3SW",
            QDistribution::ChiSquareIv { .. } => "Chi2IV",
            QDistribution::WelchIv { .. } => "WelchIV",
            QDistribution::BjIv(_) => "BJIV",
        }
    }
}

/// The exact law of Q for mean difference with constant weights: the
/// weighted-chi-square distribution whose eigenvalues come from the
/// covariance-congruent form Σ^{1/2} A Σ^{1/2}, Σ = diag(v²_i + τ²).
pub fn exact_weighted_chi2(state: &ModelState, scheme: &WeightScheme) -> Result<QDistribution> {
    Ok(QDistribution::FarebrotherSw(weighted_chi2_law(
        &state.cond_vars,
        state.tau2,
        scheme,
    )?))
}

pub(crate) fn weighted_chi2_law(
    cond_vars: &[f64],
    tau2: f64,
    scheme: &WeightScheme,
) -> Result<WeightedChiSquare> {
    if cond_vars.len() != scheme.len() {
        return Err(Error::LengthMismatch { left: cond_vars.len(), right: scheme.len() });
    }
    let a = q_form_matrix(scheme);
    let sd: Vec<f64> = cond_vars.iter().map(|&v| (v + tau2).sqrt()).collect();
    let k = cond_vars.len();
    let congruent = Matrix::from_fn(k, |i, j| sd[i] * a.get(i, j) * sd[j]);
    let eigenvalues = symmetric_eigenvalues(&congruent)?;
    WeightedChiSquare::from_eigenvalues(&eigenvalues)
}

/// Two-moment fit: p = 2[E(Q²)/E(Q)² − 1]⁻¹ and c = E(Q)/p.
pub fn m2_approx(qm: &QMoments) -> Result<QDistribution> {
    if !(qm.mean > 0.0) {
        return Err(Error::DegenerateMoments {
            reason: format!("mean of Q must be positive, got {}", qm.mean),
        });
    }
    if qm.raw2 <= qm.mean * qm.mean {
        return Err(Error::DegenerateMoments {
            reason: format!(
                "E(Q²) = {} does not exceed E(Q)² = {}",
                qm.raw2,
                qm.mean * qm.mean
            ),
        });
    }
    let p = 2.0 / (qm.raw2 / (qm.mean * qm.mean) - 1.0);
    let c = qm.mean / p;
    Ok(QDistribution::M2Sw { c, p })
}

/// Three-moment fit of c·(χ²_p)^r by matching E(Q), E(Q²), E(Q³).
///
/// The moment ratios A = E(Q²)/E(Q)² and B = E(Q³)/E(Q)³ pin (r, p)
/// through a 2×2 system in log-gamma space, solved by damped Newton from
/// the two-moment starting point. Any failure — non-convergence, a
/// nonpositive parameter, moments outside the reachable region — is the
/// typed `M3Breakdown` so callers can fall back explicitly.
pub fn m3_approx(qm: &QMoments) -> Result<QDistribution> {
    let breakdown = |detail: String| Error::M3Breakdown { detail };
    if !(qm.mean > 0.0) || !(qm.variance > 0.0) || !qm.raw3.is_finite() || qm.raw3 <= 0.0 {
        return Err(breakdown(format!(
            "moments outside fit range: mean = {}, variance = {}, raw3 = {}",
            qm.mean, qm.variance, qm.raw3
        )));
    }
    let ratio_a = qm.raw2 / (qm.mean * qm.mean);
    let ratio_b = qm.raw3 / (qm.mean * qm.mean * qm.mean);
    if ratio_a <= 1.0 || ratio_b <= ratio_a {
        return Err(breakdown(format!(
            "moment ratios not in the chi-square power family: A = {ratio_a}, B = {ratio_b}"
        )));
    }
    let (ln_a, ln_b) = (ratio_a.ln(), ratio_b.ln());

    let system = |[r, p]: [f64; 2]| -> [f64; 2] {
        if r <= 0.0 || p <= 0.0 {
            return [f64::INFINITY, f64::INFINITY];
        }
        let half_p = p / 2.0;
        let lg = |v: f64| ln_gamma_unchecked(v);
        [
            lg(2.0 * r + half_p) + lg(half_p) - 2.0 * lg(r + half_p) - ln_a,
            lg(3.0 * r + half_p) + 2.0 * lg(half_p) - 3.0 * lg(r + half_p) - ln_b,
        ]
    };

    let p_start = 2.0 / (ratio_a - 1.0);
    let report = newton_2d(system, [1.0, p_start], 1e-10);
    if !report.converged {
        return Err(breakdown(format!(
            "moment-matching solve stalled after {} iterations (residual {:.3e})",
            report.iterations, report.residual
        )));
    }
    let [r, p] = report.root;
    if !(r > 0.0) || !(p > 0.0) || !r.is_finite() || !p.is_finite() {
        return Err(breakdown(format!("solver returned nonpositive parameters r = {r}, p = {p}")));
    }
    // c = E(Q²) Γ(r + p/2) / (2^r E(Q) Γ(2r + p/2)), evaluated in log space.
    let ln_c = qm.raw2.ln() - qm.mean.ln() - r * std::f64::consts::LN_2
        + ln_gamma_unchecked(r + p / 2.0)
        - ln_gamma_unchecked(2.0 * r + p / 2.0);
    let c = ln_c.exp();
    if !c.is_finite() || c <= 0.0 {
        return Err(breakdown(format!("scale underflow: ln c = {ln_c}")));
    }
    Ok(QDistribution::M3Sw { c, p, r })
}

/// The classical χ²_{K−1} null approximation for Q with IV weights.
pub fn chi2_iv(k: usize) -> Result<QDistribution> {
    if k < 2 {
        return Err(Error::TooFewStudies { required: 2, actual: k });
    }
    Ok(QDistribution::ChiSquareIv { df: (k - 1) as f64 })
}

/// Welch's heteroscedastic one-way ANOVA law for Q with estimated IV
/// weights: Q ≈ (K−1)·(1 + 2(K−2)Λ/(K²−1))·F(K−1, f₂), where
/// Λ = Σ (1−q_i)²/f_i, f₂ = (K²−1)/(3Λ), and the per-study degrees of
/// freedom f_i follow the Satterthwaite rule for the variance of a mean
/// difference.
pub fn welch_iv(studies: &[StudySummary]) -> Result<QDistribution> {
    let k = studies.len();
    if k < 2 {
        return Err(Error::TooFewStudies { required: 2, actual: k });
    }
    let weights: Vec<f64> = studies.iter().map(|s| 1.0 / s.cond_var()).collect();
    let total: f64 = weights.iter().sum();

    let mut lambda = 0.0;
    for (index, study) in studies.iter().enumerate() {
        let fi = satterthwaite_df(study);
        if !(fi > 0.0) {
            return Err(Error::NonPositive { what: "Welch per-study df", index, value: fi });
        }
        let qi = weights[index] / total;
        lambda += (1.0 - qi) * (1.0 - qi) / fi;
    }

    let kf = k as f64;
    let scale = (kf - 1.0) * (1.0 + 2.0 * (kf - 2.0) * lambda / (kf * kf - 1.0));
    let df2 = (kf * kf - 1.0) / (3.0 * lambda);
    Ok(QDistribution::WelchIv { scale, df1: kf - 1.0, df2 })
}

/// Satterthwaite degrees of freedom of v̂² = s²_T/n_T + s²_C/n_C.
pub fn satterthwaite_df(study: &StudySummary) -> f64 {
    let v2 = study.cond_var();
    let nt = study.n_treat as f64;
    let nc = study.n_ctrl as f64;
    let denom = study.var_treat * study.var_treat / (nt * nt * (nt - 1.0))
        + study.var_ctrl * study.var_ctrl / (nc * nc * (nc - 1.0));
    v2 * v2 / denom
}

/// Biggerstaff–Jackson: treat the estimated IV weights 1/v̂²_i as
/// constants and delegate to the weighted-chi-square evaluator with
/// Σ = diag(v̂²_i + τ²). At τ² = 0 every eigenvalue is 1 and the law is
/// exactly χ²_{K−1}.
pub fn bj_iv(studies: &[StudySummary], tau2: f64) -> Result<QDistribution> {
    if studies.len() < 2 {
        return Err(Error::TooFewStudies { required: 2, actual: studies.len() });
    }
    let scheme = crate::meta::inverse_variance_weights(studies, 0.0)?;
    let cond_vars: Vec<f64> = studies.iter().map(|s| s.cond_var()).collect();
    Ok(QDistribution::BjIv(weighted_chi2_law(&cond_vars, tau2, &scheme)?))
}
