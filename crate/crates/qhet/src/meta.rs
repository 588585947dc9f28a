//! Domain types for the random-effects model and computation of the
//! generalized Q statistic and its weight schemes.
//!
//! The model: study i reports an effect estimate that, conditionally on
//! the study's true effect, has variance v²_i = σ²_iT/n_iT + σ²_iC/n_iC;
//! the true effects are normal with between-study variance τ². The Q
//! statistic is the weighted sum of squared deviations of the estimates
//! from their weighted mean, for an arbitrary scheme of positive weights.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numerics::Matrix;
use crate::Result;

/// One study's arm sizes, arm variances (true or estimated), and effect
/// estimate in mean-difference units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub n_treat: u32,
    pub n_ctrl: u32,
    pub var_treat: f64,
    pub var_ctrl: f64,
    pub effect: f64,
}

impl StudySummary {
    /// Validated constructor: both arms need n >= 2 (sample variances
    /// require at least one degree of freedom), positive variances, and a
    /// finite effect.
    pub fn new(n_treat: u32, n_ctrl: u32, var_treat: f64, var_ctrl: f64, effect: f64) -> Result<Self> {
        let study = StudySummary { n_treat, n_ctrl, var_treat, var_ctrl, effect };
        study.validate(0)?;
        Ok(study)
    }

    pub(crate) fn validate(&self, index: usize) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidStudy { index, reason });
        if self.n_treat < 2 || self.n_ctrl < 2 {
            return fail(format!(
                "arm sizes must be at least 2, got ({}, {})",
                self.n_treat, self.n_ctrl
            ));
        }
        if !(self.var_treat > 0.0) || !(self.var_ctrl > 0.0) {
            return fail(format!(
                "variances must be positive, got ({}, {})",
                self.var_treat, self.var_ctrl
            ));
        }
        if !self.effect.is_finite() {
            return fail(format!("effect must be finite, got {}", self.effect));
        }
        Ok(())
    }

    /// Estimated (or true) conditional variance of the effect estimate.
    pub fn cond_var(&self) -> f64 {
        self.var_treat / self.n_treat as f64 + self.var_ctrl / self.n_ctrl as f64
    }

    /// Effective sample size ñ = n_C·n_T/(n_C + n_T).
    pub fn effective_sample_size(&self) -> f64 {
        let nt = self.n_treat as f64;
        let nc = self.n_ctrl as f64;
        nc * nt / (nc + nt)
    }
}

fn validate_studies(studies: &[StudySummary]) -> Result<()> {
    if studies.is_empty() {
        return Err(Error::NoStudies);
    }
    for (i, study) in studies.iter().enumerate() {
        study.validate(i)?;
    }
    Ok(())
}

/// How a weight scheme was derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    /// Constant weights ñ_i = n_iC·n_iT/(n_iC + n_iT).
    EffectiveSampleSize,
    /// Estimated inverse-variance weights 1/(v̂²_i + τ²).
    InverseVariance { tau2: f64 },
    /// User-supplied constant weights.
    Custom,
}

/// Positive per-study weights with their total W and normalized q_i = w_i/W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    weights: Vec<f64>,
    total: f64,
    normalized: Vec<f64>,
    kind: WeightKind,
}

impl WeightScheme {
    /// Build a scheme from raw weights, checking positivity and that the
    /// normalized weights sum to 1 within 1e-12.
    pub fn new(weights: Vec<f64>, kind: WeightKind) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::NoStudies);
        }
        for (index, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositive { what: "weight", index, value: w });
            }
        }
        let total: f64 = weights.iter().sum();
        let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let q_sum: f64 = normalized.iter().sum();
        debug_assert!((q_sum - 1.0).abs() <= 1e-12);
        Ok(WeightScheme { weights, total, normalized, kind })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// W = Σ w_i.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// q_i = w_i / W.
    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }
}

/// Model parameters a distribution or moment computation conditions on:
/// per-study conditional variances, the between-study variance, and the
/// overall mean (which enters only through centering).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub tau2: f64,
    pub cond_vars: Vec<f64>,
    pub mu: f64,
}

impl ModelState {
    pub fn new(tau2: f64, cond_vars: Vec<f64>, mu: f64) -> Result<Self> {
        if cond_vars.len() < 2 {
            return Err(Error::TooFewStudies { required: 2, actual: cond_vars.len() });
        }
        if !(tau2 >= 0.0) {
            return Err(Error::Domain {
                function: "ModelState::new",
                reason: format!("tau2 must be nonnegative, got {tau2}"),
            });
        }
        for (index, &v) in cond_vars.iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::NonPositive { what: "conditional variance", index, value: v });
            }
        }
        Ok(ModelState { tau2, cond_vars, mu })
    }

    /// Derive the state from study summaries, reading their variance
    /// fields as the conditional variances.
    pub fn from_studies(studies: &[StudySummary], tau2: f64, mu: f64) -> Result<Self> {
        validate_studies(studies)?;
        ModelState::new(tau2, studies.iter().map(|s| s.cond_var()).collect(), mu)
    }

    pub fn k(&self) -> usize {
        self.cond_vars.len()
    }
}

/// Constant effective-sample-size (SW) weights w_i = n_iC·n_iT/(n_iC + n_iT).
pub fn effective_sample_size_weights(studies: &[StudySummary]) -> Result<WeightScheme> {
    validate_studies(studies)?;
    WeightScheme::new(
        studies.iter().map(|s| s.effective_sample_size()).collect(),
        WeightKind::EffectiveSampleSize,
    )
}

/// Inverse-variance weights w_i = 1/(v̂²_i + τ²); τ² = 0 gives the
/// fixed-effect weights.
pub fn inverse_variance_weights(studies: &[StudySummary], tau2: f64) -> Result<WeightScheme> {
    validate_studies(studies)?;
    let weights = studies
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let denom = s.cond_var() + tau2;
            if denom > 0.0 {
                Ok(1.0 / denom)
            } else {
                Err(Error::NonPositive { what: "v̂² + τ²", index, value: denom })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    WeightScheme::new(weights, WeightKind::InverseVariance { tau2 })
}

/// The generalized Q statistic Σ w_i (θ̂_i − θ̄_w)² with
/// θ̄_w = Σ w_i θ̂_i / W.
pub fn q_statistic(effects: &[f64], scheme: &WeightScheme) -> Result<f64> {
    if effects.len() != scheme.len() {
        return Err(Error::LengthMismatch { left: effects.len(), right: scheme.len() });
    }
    if effects.len() < 2 {
        return Err(Error::TooFewStudies { required: 2, actual: effects.len() });
    }
    let mean: f64 = effects
        .iter()
        .zip(scheme.normalized())
        .map(|(y, q)| q * y)
        .sum();
    let q = effects
        .iter()
        .zip(scheme.weights())
        .map(|(y, w)| {
            let d = y - mean;
            w * d * d
        })
        .sum::<f64>();
    Ok(q.max(0.0))
}

/// The symmetric matrix A = W·(diag(q) − q qᵀ) with Q = Θᵀ A Θ.
///
/// A is positive semidefinite of rank K−1; its structural zero eigenvector
/// is the all-ones vector, which is what makes Q location invariant.
pub fn q_form_matrix(scheme: &WeightScheme) -> Matrix {
    let q = scheme.normalized();
    let w = scheme.total();
    Matrix::from_fn(scheme.len(), |i, j| {
        let delta = if i == j { q[i] } else { 0.0 };
        w * (delta - q[i] * q[j])
    })
}
