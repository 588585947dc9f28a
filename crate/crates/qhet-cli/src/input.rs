//! Study CSV ingestion and the shared CLI flag vocabularies.

use anyhow::{bail, Context, Result};
use qhet::meta::{effective_sample_size_weights, StudySummary, WeightKind, WeightScheme};
use qhet::sim::Tau2Policy;
use qhet::tau::TauMethod;
use std::path::Path;

/// Read the study input CSV: header `n_treat,n_ctrl,var_treat,var_ctrl,effect`,
/// one row per study, '.' decimal separator.
pub fn read_studies_csv(path: &Path) -> Result<Vec<StudySummary>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;

    let headers = reader.headers()?.clone();
    let expected = ["n_treat", "n_ctrl", "var_treat", "var_ctrl", "effect"];
    let header_fields: Vec<&str> = headers.iter().collect();
    if header_fields != expected {
        bail!(
            "bad header: expected `{}`, got `{}`",
            expected.join(","),
            header_fields.join(",")
        );
    }

    let mut studies = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(studies.len() as u64 + 2);
        let parse_u32 = |idx: usize, name: &str| -> Result<u32> {
            record[idx]
                .parse::<u32>()
                .with_context(|| format!("line {line}: bad {name} `{}`", &record[idx]))
        };
        let parse_f64 = |idx: usize, name: &str| -> Result<f64> {
            record[idx]
                .parse::<f64>()
                .with_context(|| format!("line {line}: bad {name} `{}`", &record[idx]))
        };
        let study = StudySummary::new(
            parse_u32(0, "n_treat")?,
            parse_u32(1, "n_ctrl")?,
            parse_f64(2, "var_treat")?,
            parse_f64(3, "var_ctrl")?,
            parse_f64(4, "effect")?,
        )
        .with_context(|| format!("line {line}: invalid study"))?;
        studies.push(study);
    }
    if studies.len() < 2 {
        bail!("need at least 2 studies, got {}", studies.len());
    }
    Ok(studies)
}

/// Serialize studies back to the input CSV schema. Float fields use the
/// shortest round-trip representation, so read -> write -> read is
/// lossless.
pub fn studies_to_csv(studies: &[StudySummary]) -> String {
    let mut out = String::from("n_treat,n_ctrl,var_treat,var_ctrl,effect\n");
    for s in studies {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.n_treat, s.n_ctrl, s.var_treat, s.var_ctrl, s.effect
        ));
    }
    out
}

/// Parse `--weights sw|iv|custom:<file>` into a constant scheme for the
/// generalized Q ("iv" selects the estimated fixed-effect weights).
pub fn parse_weights(spec: &str, studies: &[StudySummary]) -> Result<WeightScheme> {
    match spec {
        "sw" => Ok(effective_sample_size_weights(studies)?),
        "iv" => Ok(qhet::meta::inverse_variance_weights(studies, 0.0)?),
        other => {
            let Some(path) = other.strip_prefix("custom:") else {
                bail!("unknown weight scheme `{other}` (expected sw, iv, or custom:<file>)");
            };
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read weight file {path}"))?;
            let mut weights = Vec::new();
            for (i, token) in text.split_whitespace().enumerate() {
                let w: f64 = token
                    .parse()
                    .with_context(|| format!("weight {} `{token}` is not a number", i + 1))?;
                if !(w > 0.0) {
                    bail!("weight {} must be positive, got {w}", i + 1);
                }
                weights.push(w);
            }
            if weights.len() != studies.len() {
                bail!(
                    "{} weights for {} studies",
                    weights.len(),
                    studies.len()
                );
            }
            Ok(WeightScheme::new(weights, WeightKind::Custom)?)
        }
    }
}

/// Parse `--tau2 generating|sdl|dl|mp|reml|<value>`.
pub fn parse_tau2_policy(spec: &str) -> Result<Tau2Policy> {
    Ok(match spec.to_ascii_lowercase().as_str() {
        "generating" => Tau2Policy::Generating,
        "sdl" => Tau2Policy::Estimated(TauMethod::Sdl),
        "dl" => Tau2Policy::Estimated(TauMethod::Dl),
        "mp" => Tau2Policy::Estimated(TauMethod::Mp),
        "reml" => Tau2Policy::Estimated(TauMethod::Reml),
        other => {
            let value: f64 = other
                .parse()
                .with_context(|| format!("`{other}` is not an estimator name or a τ² value"))?;
            if !(value >= 0.0) {
                bail!("τ² must be nonnegative, got {value}");
            }
            Tau2Policy::Fixed(value)
        }
    })
}
