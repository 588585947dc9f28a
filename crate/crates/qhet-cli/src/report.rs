//! Figure families over simulation results: each family turns the
//! long-format results CSV into a panel-grid SVG plus a companion CSV of
//! exactly the plotted numbers.

use anyhow::{bail, Context, Result};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::svg::{self, Figure, Panel, Series};

/// One row of the long-format results CSV.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub cell_id: String,
    pub k: usize,
    pub n_pattern: String,
    pub f: f64,
    pub sigma2_t: f64,
    pub tau2: f64,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 9 {
            bail!("expected 9 columns, got {} in {:?}", record.len(), record);
        }
        rows.push(ResultRow {
            cell_id: record[0].to_string(),
            k: record[1].parse()?,
            n_pattern: record[2].to_string(),
            f: record[3].parse()?,
            sigma2_t: record[4].parse()?,
            tau2: record[5].parse()?,
            method: record[6].to_string(),
            metric: record[7].to_string(),
            value: record[8].parse()?,
        });
    }
    Ok(rows)
}

/// The five figure families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// p̂ − p versus p at τ² = 0 (P–P error plots).
    B1,
    /// Empirical level versus sample size at a nominal α.
    B2,
    /// Empirical p-values versus τ² at a nominal α.
    B3,
    /// Power versus τ² at a nominal α (null-calibrated tests).
    B4,
    /// Bias of the τ² estimators versus τ².
    B5,
}

impl Family {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "b1" => Family::B1,
            "b2" => Family::B2,
            "b3" => Family::B3,
            "b4" => Family::B4,
            "b5" => Family::B5,
            other => bail!("unknown family `{other}` (expected b1..b5)"),
        })
    }

    pub fn file_stem(&self) -> &'static str {
        match self {
            Family::B1 => "b1_pp_error",
            Family::B2 => "b2_level_vs_n",
            Family::B3 => "b3_phat_vs_tau2",
            Family::B4 => "b4_power_vs_tau2",
            Family::B5 => "b5_bias_vs_tau2",
        }
    }
}

/// Filters shared by the families; `alpha` applies to B2–B4.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub alpha: f64,
    pub f: f64,
    pub sigma2_t: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { alpha: 0.05, f: 0.5, sigma2_t: 1.0 }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Numeric sort key for a size-pattern label ("n20" before "u13" groups).
fn pattern_order(label: &str) -> (u8, u32) {
    let (family, digits) = if let Some(rest) = label.strip_prefix('n') {
        (0u8, rest)
    } else if let Some(rest) = label.strip_prefix('u') {
        (1u8, rest)
    } else {
        (2u8, label)
    };
    (family, digits.parse().unwrap_or(u32::MAX))
}

#[derive(Debug)]
struct BuiltFigure {
    figure: Figure,
    companion: String,
}

fn companion_header() -> String {
    "family,panel,series,x,y\n".to_string()
}

/// Assemble panels keyed by (n_pattern, K) with one series per method.
fn panel_grid(
    family: &str,
    rows: &[&ResultRow],
    methods: &[&str],
    x_of: impl Fn(&ResultRow) -> f64,
    y_of: impl Fn(&ResultRow) -> f64,
) -> (Vec<Panel>, String, usize) {
    let mut keys: Vec<(String, usize)> = rows
        .iter()
        .map(|r| (r.n_pattern.clone(), r.k))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    keys.sort_by(|a, b| {
        pattern_order(&a.0)
            .cmp(&pattern_order(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let n_count = keys
        .iter()
        .map(|(pattern, _)| pattern.clone())
        .collect::<BTreeSet<_>>()
        .len();

    let mut companion = companion_header();
    let mut panels = Vec::new();
    for (pattern, k) in keys {
        // No comma: the title becomes a bare CSV field in the companion.
        let title = format!("{pattern} K={k}");
        let mut series = Vec::new();
        for &method in methods {
            let mut points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.n_pattern == pattern && r.k == k && r.method == method)
                .map(|r| (x_of(r), y_of(r)))
                .collect();
            points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            points.dedup_by(|a, b| a.0 == b.0);
            if points.is_empty() {
                continue;
            }
            for &(x, y) in &points {
                let _ = writeln!(companion, "{family},{title},{method},{x},{y}");
            }
            series.push(Series { label: method.to_string(), points });
        }
        if !series.is_empty() {
            panels.push(Panel { title, series });
        }
    }
    (panels, companion, n_count.max(1))
}

fn available_metrics(rows: &[ResultRow]) -> String {
    let mut metrics: Vec<String> = rows
        .iter()
        .map(|r| r.metric.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    metrics.sort();
    metrics.join(", ")
}

fn build_family(rows: &[ResultRow], family: Family, options: &ReportOptions) -> Result<BuiltFigure> {
    if rows.is_empty() {
        bail!("empty input: no result rows");
    }
    let filter_cell = |r: &&ResultRow| close(r.f, options.f) && close(r.sigma2_t, options.sigma2_t);

    let built = match family {
        Family::B1 => {
            let selected: Vec<&ResultRow> = rows
                .iter()
                .filter(filter_cell)
                .filter(|r| r.tau2 == 0.0 && r.metric.starts_with("phat@"))
                .collect();
            if selected.is_empty() {
                bail!(
                    "no τ²=0 phat rows for f={}, σ²T={} (available metrics: {})",
                    options.f,
                    options.sigma2_t,
                    available_metrics(rows)
                );
            }
            let methods = ["FSW", "M3SW", "M2SW", "Chi2IV", "WelchIV"];
            let (panels, companion, columns) = panel_grid(
                "B1",
                &selected,
                &methods,
                |r| r.metric["phat@".len()..].parse().unwrap_or(f64::NAN),
                |r| {
                    let p: f64 = r.metric["phat@".len()..].parse().unwrap_or(f64::NAN);
                    r.value - p
                },
            );
            BuiltFigure {
                figure: Figure {
                    title: format!(
                        "Approximation error (phat - p) at tau2 = 0, f = {}, sigma2T = {}",
                        options.f, options.sigma2_t
                    ),
                    x_label: "nominal p".into(),
                    y_label: "phat - p".into(),
                    caption: "Upper-tail probability errors under the null".into(),
                    columns,
                    zero_line: true,
                    panels,
                },
                companion,
            }
        }
        Family::B2 => {
            let metric = format!("level@{}", options.alpha);
            let selected: Vec<&ResultRow> = rows
                .iter()
                .filter(filter_cell)
                .filter(|r| r.tau2 == 0.0 && r.metric == metric)
                .collect();
            if selected.is_empty() {
                bail!(
                    "no `{metric}` rows for f={}, σ²T={} (available metrics: {})",
                    options.f,
                    options.sigma2_t,
                    available_metrics(rows)
                );
            }
            // One panel per K; x is the average study size.
            let mut companion = companion_header();
            let mut panels = Vec::new();
            let ks: BTreeSet<usize> = selected.iter().map(|r| r.k).collect();
            let methods = ["FSW", "M3SW", "M2SW", "WelchIV", "Chi2IV"];
            for k in ks {
                let title = format!("K={k}");
                let mut series = Vec::new();
                for method in methods {
                    let mut points: Vec<(f64, f64)> = selected
                        .iter()
                        .filter(|r| r.k == k && r.method == method)
                        .map(|r| (pattern_order(&r.n_pattern).1 as f64, r.value))
                        .collect();
                    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                    if points.is_empty() {
                        continue;
                    }
                    for &(x, y) in &points {
                        let _ = writeln!(companion, "B2,{title},{method},{x},{y}");
                    }
                    series.push(Series { label: method.to_string(), points });
                }
                if !series.is_empty() {
                    panels.push(Panel { title, series });
                }
            }
            let columns = panels.len().max(1);
            BuiltFigure {
                figure: Figure {
                    title: format!(
                        "Empirical level at alpha = {} vs sample size, f = {}, sigma2T = {}",
                        options.alpha, options.f, options.sigma2_t
                    ),
                    x_label: "n (average study size)".into(),
                    y_label: "empirical level".into(),
                    caption: format!("Nominal level {}", options.alpha),
                    columns,
                    zero_line: false,
                    panels,
                },
                companion,
            }
        }
        Family::B3 | Family::B4 => {
            let is_b3 = family == Family::B3;
            let metric_null = format!("level@{}", options.alpha);
            let (prefix, methods): (String, Vec<&str>) = if is_b3 {
                (format!("phat@{}", options.alpha), vec!["FSW", "M3SW", "M2SW", "BJIV"])
            } else {
                (
                    format!("power@{}", options.alpha),
                    vec!["FSW", "M3SW", "M2SW", "Chi2IV", "WelchIV"],
                )
            };
            let selected: Vec<&ResultRow> = rows
                .iter()
                .filter(filter_cell)
                .filter(|r| {
                    r.metric == prefix || (!is_b3 && r.tau2 == 0.0 && r.metric == metric_null)
                })
                .collect();
            if selected.is_empty() {
                bail!(
                    "no `{prefix}` rows for f={}, σ²T={} (available metrics: {})",
                    options.f,
                    options.sigma2_t,
                    available_metrics(rows)
                );
            }
            let label = if is_b3 { "B3" } else { "B4" };
            let (panels, companion, columns) =
                panel_grid(label, &selected, &methods, |r| r.tau2, |r| r.value);
            BuiltFigure {
                figure: Figure {
                    title: if is_b3 {
                        format!(
                            "Empirical p-values at nominal {} vs tau2, f = {}, sigma2T = {}",
                            options.alpha, options.f, options.sigma2_t
                        )
                    } else {
                        format!(
                            "Power at level {} vs tau2, f = {}, sigma2T = {}",
                            options.alpha, options.f, options.sigma2_t
                        )
                    },
                    x_label: "tau2".into(),
                    y_label: if is_b3 { "phat".into() } else { "rejection rate".into() },
                    caption: if is_b3 {
                        "Approximations parameterized by the generating tau2".into()
                    } else {
                        "Null-calibrated tests applied to non-null data".into()
                    },
                    columns,
                    zero_line: false,
                    panels,
                },
                companion,
            }
        }
        Family::B5 => {
            let selected: Vec<&ResultRow> = rows
                .iter()
                .filter(filter_cell)
                .filter(|r| r.metric == "bias")
                .collect();
            if selected.is_empty() {
                bail!(
                    "no `bias` rows for f={}, σ²T={} (available metrics: {})",
                    options.f,
                    options.sigma2_t,
                    available_metrics(rows)
                );
            }
            let methods = ["SDL", "DL", "REML", "MP"];
            let (panels, companion, columns) =
                panel_grid("B5", &selected, &methods, |r| r.tau2, |r| r.value);
            BuiltFigure {
                figure: Figure {
                    title: format!(
                        "Bias of tau2 estimators vs tau2, f = {}, sigma2T = {}",
                        options.f, options.sigma2_t
                    ),
                    x_label: "tau2".into(),
                    y_label: "bias".into(),
                    caption: "Estimators: SDL, DL, REML, MP (CDL not implemented)".into(),
                    columns,
                    zero_line: true,
                    panels,
                },
                companion,
            }
        }
    };
    if built.figure.panels.is_empty() {
        bail!("no panels could be built (available metrics: {})", available_metrics(rows));
    }
    Ok(built)
}

/// Build and write `<stem>.svg` and `<stem>.csv` under `out_dir`.
/// Nothing is written when the family cannot be built.
pub fn write_family(
    rows: &[ResultRow],
    family: Family,
    options: &ReportOptions,
    out_dir: &Path,
) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let built = build_family(rows, family, options)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let svg_path = out_dir.join(format!("{}.svg", family.file_stem()));
    let csv_path = out_dir.join(format!("{}.csv", family.file_stem()));
    std::fs::write(&svg_path, svg::render(&built.figure, &built.companion))?;
    std::fs::write(&csv_path, &built.companion)?;
    Ok((svg_path, csv_path))
}
