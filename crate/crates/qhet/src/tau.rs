//! Point estimators of the between-study variance τ².
//!
//! SDL inverts the first moment of Q under constant (sample-size)
//! weights; DL, Mandel–Paule, and REML are the standard inverse-variance
//! estimators, included for comparison. All four truncate at zero and
//! also expose the untruncated value for bias diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::meta::{inverse_variance_weights, q_statistic, StudySummary, WeightKind, WeightScheme};
use crate::numerics::brent_root;
use crate::Result;

/// Which estimator produced a [`TauEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TauMethod {
    Sdl,
    Dl,
    Mp,
    Reml,
}

impl TauMethod {
    pub const ALL: [TauMethod; 4] = [TauMethod::Sdl, TauMethod::Dl, TauMethod::Mp, TauMethod::Reml];

    pub fn name(&self) -> &'static str {
        match self {
            TauMethod::Sdl => "SDL",
            TauMethod::Dl => "DL",
            TauMethod::Mp => "MP",
            TauMethod::Reml => "REML",
        }
    }
}

/// A τ² point estimate with its truncation state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub value: f64,
    pub method: TauMethod,
    /// The estimate hit the zero floor.
    pub truncated: bool,
    /// Iterations used (0 for the closed forms).
    pub iterations: usize,
    /// Pre-truncation value when it is defined: always for SDL and DL,
    /// and for MP/REML when the profile root exists on the extended
    /// domain τ² > −min v̂².
    pub untruncated: Option<f64>,
}

fn require_k(studies: &[StudySummary], required: usize) -> Result<()> {
    if studies.len() < required {
        return Err(Error::TooFewStudies { required, actual: studies.len() });
    }
    for (i, s) in studies.iter().enumerate() {
        s.validate(i)?;
    }
    Ok(())
}

/// Moment estimator under a constant-weight scheme:
/// τ̂² = max( (Q/W − Σ q_i(1−q_i) v̂²_i) / Σ q_i(1−q_i), 0 ).
pub fn sdl(studies: &[StudySummary], scheme: &WeightScheme) -> Result<TauEstimate> {
    require_k(studies, 2)?;
    if matches!(scheme.kind(), WeightKind::InverseVariance { .. }) {
        return Err(Error::Domain {
            function: "sdl",
            reason: "SDL requires a constant-weight scheme".into(),
        });
    }
    let effects: Vec<f64> = studies.iter().map(|s| s.effect).collect();
    let q = q_statistic(&effects, scheme)?;
    let qn = scheme.normalized();
    let mut coeff = 0.0;
    let mut noise = 0.0;
    for (i, study) in studies.iter().enumerate() {
        let a = qn[i] * (1.0 - qn[i]);
        coeff += a;
        noise += a * study.cond_var();
    }
    let untruncated = (q / scheme.total() - noise) / coeff;
    Ok(TauEstimate {
        value: untruncated.max(0.0),
        method: TauMethod::Sdl,
        truncated: untruncated < 0.0,
        iterations: 0,
        untruncated: Some(untruncated),
    })
}

/// DerSimonian–Laird: with fixed-effect weights w_i = 1/v̂²_i,
/// τ̂² = max( (Q_IV − (K−1)) / (S₁ − S₂/S₁), 0 ).
pub fn dl(studies: &[StudySummary]) -> Result<TauEstimate> {
    require_k(studies, 2)?;
    let scheme = inverse_variance_weights(studies, 0.0)?;
    let effects: Vec<f64> = studies.iter().map(|s| s.effect).collect();
    let q_iv = q_statistic(&effects, &scheme)?;
    let s1: f64 = scheme.weights().iter().sum();
    let s2: f64 = scheme.weights().iter().map(|w| w * w).sum();
    let denom = s1 - s2 / s1;
    if !(denom > 0.0) {
        return Err(Error::DegenerateMoments {
            reason: format!("DL denominator S1 - S2/S1 = {denom} is not positive"),
        });
    }
    let untruncated = (q_iv - (studies.len() as f64 - 1.0)) / denom;
    Ok(TauEstimate {
        value: untruncated.max(0.0),
        method: TauMethod::Dl,
        truncated: untruncated < 0.0,
        iterations: 0,
        untruncated: Some(untruncated),
    })
}

/// The generalized Q with weights 1/(v̂²_i + τ²); strictly decreasing in τ².
pub fn generalized_q(studies: &[StudySummary], tau2: f64) -> Result<f64> {
    let scheme = inverse_variance_weights(studies, tau2)?;
    let effects: Vec<f64> = studies.iter().map(|s| s.effect).collect();
    q_statistic(&effects, &scheme)
}

const MP_TOL: f64 = 1e-10;
const MP_MAX_DOUBLINGS: usize = 60;

/// Mandel–Paule: the τ̂² >= 0 solving Q_gen(τ̂²) = K − 1, or 0 when
/// Q_gen(0) <= K − 1.
pub fn mandel_paule(studies: &[StudySummary]) -> Result<TauEstimate> {
    require_k(studies, 2)?;
    let target = studies.len() as f64 - 1.0;
    let profile = |tau2: f64| generalized_q(studies, tau2).expect("positive weights") - target;

    let at_zero = profile(0.0);
    if at_zero <= 0.0 {
        let truncated = at_zero < 0.0;
        let untruncated = if truncated {
            negative_domain_root(studies, &profile)
        } else {
            Some(0.0)
        };
        return Ok(TauEstimate {
            value: 0.0,
            method: TauMethod::Mp,
            truncated,
            iterations: 0,
            untruncated,
        });
    }

    // Q_gen is strictly decreasing in τ², so doubling the upper end must
    // eventually cross the target.
    let mut hi = 1.0;
    let mut f_hi = profile(hi);
    let mut doublings = 0;
    let mut prev = at_zero;
    while f_hi > 0.0 {
        assert!(f_hi < prev, "Mandel-Paule profile must decrease in tau2");
        prev = f_hi;
        doublings += 1;
        if doublings > MP_MAX_DOUBLINGS {
            return Err(Error::BracketInvalid { lo: 0.0, hi, f_lo: at_zero, f_hi });
        }
        hi *= 2.0;
        f_hi = profile(hi);
    }
    let report = brent_root(profile, 0.0, hi, MP_TOL)?;
    Ok(TauEstimate {
        value: report.root.max(0.0),
        method: TauMethod::Mp,
        truncated: false,
        iterations: report.iterations,
        untruncated: Some(report.root),
    })
}

/// Root of a profile function on the extension τ² ∈ (−min v̂², 0), used
/// only to report untruncated values for bias diagnostics.
fn negative_domain_root(studies: &[StudySummary], profile: &dyn Fn(f64) -> f64) -> Option<f64> {
    let min_v2 = studies.iter().map(|s| s.cond_var()).fold(f64::INFINITY, f64::min);
    let lo = -0.999 * min_v2;
    let f_lo = profile(lo);
    let f_hi = profile(0.0);
    if !f_lo.is_finite() || f_lo * f_hi > 0.0 {
        return None;
    }
    brent_root(profile, lo, 0.0, MP_TOL).ok().map(|r| r.root)
}

const REML_TOL: f64 = 1e-10;
const REML_MAX_ITER: usize = 500;

/// Restricted-likelihood score in τ², up to the factor 1/2:
/// Σ w²(y − μ̂)² − Σ w + Σ w²/Σ w with w = 1/(v̂² + τ²).
fn reml_score(studies: &[StudySummary], tau2: f64) -> f64 {
    let weights: Vec<f64> = studies.iter().map(|s| 1.0 / (s.cond_var() + tau2)).collect();
    let w_sum: f64 = weights.iter().sum();
    let mu: f64 = studies
        .iter()
        .zip(&weights)
        .map(|(s, w)| w * s.effect)
        .sum::<f64>()
        / w_sum;
    let mut s_resid = 0.0;
    let mut s_w2 = 0.0;
    for (s, w) in studies.iter().zip(&weights) {
        let resid = s.effect - mu;
        s_resid += w * w * resid * resid;
        s_w2 += w * w;
    }
    s_resid - w_sum + s_w2 / w_sum
}

/// REML via the standard fixed-point iteration for the restricted
/// likelihood of the normal random-effects model:
///
/// τ² ← Σ w_i²[(y_i − μ̂)² − v̂²_i] / Σ w_i² + 1/Σ w_i,  w_i = 1/(v̂²_i + τ²),
///
/// floored at zero, iterated until |Δτ²| <= 1e-10. On short-period
/// cycling (extreme variance spreads can make the map non-contractive)
/// the same stationarity condition is solved directly: Brent on the
/// restricted score over a doubling bracket.
pub fn reml(studies: &[StudySummary]) -> Result<TauEstimate> {
    require_k(studies, 2)?;
    let step = |tau2: f64| -> f64 {
        let weights: Vec<f64> = studies.iter().map(|s| 1.0 / (s.cond_var() + tau2)).collect();
        let w_sum: f64 = weights.iter().sum();
        let mu: f64 = studies
            .iter()
            .zip(&weights)
            .map(|(s, w)| w * s.effect)
            .sum::<f64>()
            / w_sum;
        let mut num = 0.0;
        let mut den = 0.0;
        for (s, w) in studies.iter().zip(&weights) {
            let resid = s.effect - mu;
            num += w * w * (resid * resid - s.cond_var());
            den += w * w;
        }
        num / den + 1.0 / w_sum
    };

    let mut tau2 = dl(studies)?.value;
    for iter in 1..=REML_MAX_ITER {
        let unconstrained = step(tau2);
        let next = unconstrained.max(0.0);
        let delta = (next - tau2).abs();
        tau2 = next;
        if delta <= REML_TOL {
            let truncated = tau2 == 0.0 && unconstrained < 0.0;
            let untruncated = if truncated {
                reml_negative_root(studies)
            } else {
                Some(tau2)
            };
            return Ok(TauEstimate {
                value: tau2,
                method: TauMethod::Reml,
                truncated,
                iterations: iter,
                untruncated,
            });
        }
    }

    // Cycling fixed point: solve the score equation directly.
    let score = |t: f64| reml_score(studies, t);
    let at_zero = score(0.0);
    if at_zero <= 0.0 {
        return Ok(TauEstimate {
            value: 0.0,
            method: TauMethod::Reml,
            truncated: at_zero < 0.0,
            iterations: REML_MAX_ITER,
            untruncated: reml_negative_root(studies),
        });
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while score(hi) > 0.0 {
        doublings += 1;
        if doublings > 60 {
            return Err(Error::NonConvergence {
                solver: "reml",
                iterations: REML_MAX_ITER,
                residual: tau2,
            });
        }
        hi *= 2.0;
    }
    let report = brent_root(score, 0.0, hi, REML_TOL)?;
    Ok(TauEstimate {
        value: report.root.max(0.0),
        method: TauMethod::Reml,
        truncated: false,
        iterations: REML_MAX_ITER + report.iterations,
        untruncated: Some(report.root),
    })
}

/// Untruncated REML value: the zero of the restricted score on the
/// extended domain, when it exists.
fn reml_negative_root(studies: &[StudySummary]) -> Option<f64> {
    let score = |tau2: f64| reml_score(studies, tau2);
    let min_v2 = studies.iter().map(|s| s.cond_var()).fold(f64::INFINITY, f64::min);
    // Scan inward from the barrier for a sign change.
    let hi = 0.0;
    let f_hi = score(hi);
    for step in 1..=32 {
        let lo = -min_v2 * (1.0 - 0.5f64.powi(step)).min(0.999);
        let f_lo = score(lo);
        if f_lo.is_finite() && f_lo * f_hi <= 0.0 {
            return brent_root(score, lo, hi, REML_TOL).ok().map(|r| r.root);
        }
    }
    None
}
