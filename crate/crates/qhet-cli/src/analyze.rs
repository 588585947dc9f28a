//! Analysis of a real dataset: Q statistics, p-values under every
//! requested approximation, and all four τ² estimates.

use anyhow::Result;
use qhet::meta::{inverse_variance_weights, q_statistic, ModelState, StudySummary, WeightScheme};
use qhet::moments::{md_unconditional_moments, q_moments};
use qhet::qdist::{bj_iv, chi2_iv, exact_weighted_chi2, m2_approx, m3_approx, welch_iv};
use qhet::sim::{Method, MethodSet, Tau2Policy};
use qhet::tau::{dl, mandel_paule, reml, sdl, TauMethod};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-study weight table entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub study: usize,
    pub w_const: f64,
    pub q_const: f64,
    pub w_iv: f64,
}

/// One τ² estimate in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRow {
    pub value: f64,
    pub truncated: bool,
    pub untruncated: Option<f64>,
    pub iterations: usize,
}

/// Everything `analyze` reports; serializes losslessly to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub k: usize,
    pub weight_scheme: String,
    pub tau2_policy: String,
    /// The τ² actually plugged into the non-null approximations.
    pub tau2_plugin: f64,
    pub q_const: f64,
    pub q_iv: f64,
    pub weights: Vec<WeightRow>,
    /// Upper-tail p-values per method; `null` marks an M3 breakdown.
    pub p_values: BTreeMap<String, Option<f64>>,
    pub tau2_estimates: BTreeMap<String, TauRow>,
    pub warnings: Vec<String>,
}

/// Run the analysis. `scheme` is the constant-weight scheme for the
/// generalized Q (SW unless overridden); `policy` selects the τ² plugged
/// into the τ²-dependent approximations (0 gives the null heterogeneity
/// test).
pub fn analyze(
    studies: &[StudySummary],
    scheme: &WeightScheme,
    policy: Tau2Policy,
    policy_label: &str,
    methods: &MethodSet,
) -> Result<AnalysisReport> {
    let effects: Vec<f64> = studies.iter().map(|s| s.effect).collect();
    let cond_vars: Vec<f64> = studies.iter().map(|s| s.cond_var()).collect();
    let q_const = q_statistic(&effects, scheme)?;
    let iv_scheme = inverse_variance_weights(studies, 0.0)?;
    let q_iv = q_statistic(&effects, &iv_scheme)?;
    let mut warnings = Vec::new();

    let mut tau2_estimates = BTreeMap::new();
    for &method in &methods.estimators {
        let estimate = match method {
            TauMethod::Sdl => sdl(studies, scheme)?,
            TauMethod::Dl => dl(studies)?,
            TauMethod::Mp => mandel_paule(studies)?,
            TauMethod::Reml => reml(studies)?,
        };
        tau2_estimates.insert(
            method.name().to_string(),
            TauRow {
                value: estimate.value,
                truncated: estimate.truncated,
                untruncated: estimate.untruncated,
                iterations: estimate.iterations,
            },
        );
    }

    let tau2_plugin = match policy {
        Tau2Policy::Generating => 0.0, // no generating value outside a simulation
        Tau2Policy::Fixed(value) => value,
        Tau2Policy::Estimated(method) => match tau2_estimates.get(method.name()) {
            Some(row) => row.value,
            None => {
                let estimate = match method {
                    TauMethod::Sdl => sdl(studies, scheme)?,
                    TauMethod::Dl => dl(studies)?,
                    TauMethod::Mp => mandel_paule(studies)?,
                    TauMethod::Reml => reml(studies)?,
                };
                estimate.value
            }
        },
    };
    if matches!(policy, Tau2Policy::Generating) {
        warnings.push(
            "tau2 policy `generating` has no meaning outside a simulation; using 0".to_string(),
        );
    }

    let mut p_values: BTreeMap<String, Option<f64>> = BTreeMap::new();
    let state = ModelState::new(tau2_plugin, cond_vars.clone(), 0.0)?;
    for &method in &methods.distributions {
        let name = method.name().to_string();
        let p = match method {
            Method::FarebrotherSw => {
                Some(exact_weighted_chi2(&state, scheme)?.upper_tail(q_const)?)
            }
            Method::M2Sw => {
                let qm = q_moments(&md_unconditional_moments(&state), scheme)?;
                Some(m2_approx(&qm)?.upper_tail(q_const)?)
            }
            Method::M3Sw => {
                let qm = q_moments(&md_unconditional_moments(&state), scheme)?;
                match m3_approx(&qm) {
                    Ok(law) => Some(law.upper_tail(q_const)?),
                    Err(qhet::Error::M3Breakdown { detail }) => {
                        warnings.push(format!("M3 breakdown: {detail}"));
                        None
                    }
                    Err(other) => return Err(other.into()),
                }
            }
            Method::ChiSquareIv => Some(chi2_iv(studies.len())?.upper_tail(q_iv)?),
            Method::WelchIv => Some(welch_iv(studies)?.upper_tail(q_iv)?),
            Method::BjIv => Some(bj_iv(studies, tau2_plugin)?.upper_tail(q_iv)?),
        };
        p_values.insert(name, p);
    }

    let q_norm = scheme.normalized();
    let weights = (0..studies.len())
        .map(|i| WeightRow {
            study: i + 1,
            w_const: scheme.weights()[i],
            q_const: q_norm[i],
            w_iv: iv_scheme.weights()[i],
        })
        .collect();

    Ok(AnalysisReport {
        k: studies.len(),
        weight_scheme: scheme_label(scheme),
        tau2_policy: policy_label.to_string(),
        tau2_plugin,
        q_const,
        q_iv,
        weights,
        p_values,
        tau2_estimates,
        warnings,
    })
}

fn scheme_label(scheme: &WeightScheme) -> String {
    match scheme.kind() {
        qhet::meta::WeightKind::EffectiveSampleSize => "sw".to_string(),
        qhet::meta::WeightKind::InverseVariance { tau2 } => format!("iv(tau2={tau2})"),
        qhet::meta::WeightKind::Custom => "custom".to_string(),
    }
}

/// Companion CSV of the report (one metric per row).
pub fn report_to_csv(report: &AnalysisReport) -> String {
    let mut out = String::from("section,name,value\n");
    out.push_str(&format!("statistic,K,{}\n", report.k));
    out.push_str(&format!("statistic,Q_const,{}\n", report.q_const));
    out.push_str(&format!("statistic,Q_IV,{}\n", report.q_iv));
    for (name, p) in &report.p_values {
        match p {
            Some(p) => out.push_str(&format!("p_value,{name},{p}\n")),
            None => out.push_str(&format!("p_value,{name},NA\n")),
        }
    }
    for (name, row) in &report.tau2_estimates {
        out.push_str(&format!("tau2,{name},{}\n", row.value));
        out.push_str(&format!("tau2_truncated,{name},{}\n", row.truncated));
    }
    for row in &report.weights {
        out.push_str(&format!("weight,study{},{}\n", row.study, row.w_const));
    }
    out
}
