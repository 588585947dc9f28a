//! `qhet`: heterogeneity analysis for mean-difference meta-analysis and
//! the simulation machinery around it.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use qhet_cli::{analyze, input, report, simulate};

#[derive(Parser)]
#[command(name = "qhet")]
#[command(about = "Generalized-Q heterogeneity testing and tau2 estimation for mean differences")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Analyze a study CSV: Q statistics, p-values, tau2 estimates (JSON to stdout)
    Analyze {
        /// Input CSV with header n_treat,n_ctrl,var_treat,var_ctrl,effect
        #[arg(long)]
        input: PathBuf,
        /// Constant weight scheme: sw, iv, or custom:<file>
        #[arg(long, default_value = "sw")]
        weights: String,
        /// tau2 plugged into the tau2-dependent approximations:
        /// an estimator name (sdl, dl, mp, reml) or a fixed value; 0 runs
        /// the null heterogeneity test
        #[arg(long, default_value = "0")]
        tau2: String,
        /// Methods to evaluate (default: all)
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Also write the report as CSV to this path
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Pretty-print the JSON
        #[arg(long)]
        pretty: bool,
    },
    /// Run a simulation grid from a JSON config into results.csv + metadata.json
    Simulate {
        /// JSON config (grid subsets, seed, reps, chunks, methods)
        #[arg(long)]
        config: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the per-cell replication count
        #[arg(long)]
        reps: Option<usize>,
        /// Override the parallel chunk count
        #[arg(long)]
        chunks: Option<usize>,
        /// Override the method set
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Render a figure family from a results CSV (SVG + companion CSV)
    Report {
        /// results.csv produced by `simulate`
        #[arg(long)]
        results: PathBuf,
        /// Figure family: b1, b2, b3, b4, or b5
        #[arg(long)]
        family: String,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Nominal level for b2/b3/b4
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Control-arm fraction filter
        #[arg(long, default_value_t = 0.5)]
        f: f64,
        /// Treatment-arm variance filter
        #[arg(long, default_value_t = 1.0)]
        sigma2t: f64,
    },
    /// Pivot the long results CSV into a wide per-metric table
    Pivot {
        /// results.csv produced by `simulate`
        #[arg(long)]
        results: PathBuf,
        /// Metric to pivot, e.g. level@0.05, bias, phat@0.01
        #[arg(long)]
        metric: String,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    if let Err(error) = run() {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Commands::Analyze { input, weights, tau2, methods, csv, pretty } => {
            let studies = input::read_studies_csv(&input)?;
            let scheme = input::parse_weights(&weights, &studies)?;
            let policy = input::parse_tau2_policy(&tau2)?;
            let method_set = match methods {
                Some(names) => qhet::sim::MethodSet::from_names(&names)?,
                None => qhet::sim::MethodSet::full(),
            };
            let report = analyze::analyze(&studies, &scheme, policy, &tau2, &method_set)?;
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            if let Some(path) = csv {
                std::fs::write(&path, analyze::report_to_csv(&report))
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            let json = if pretty {
                serde_json::to_string_pretty(&report)?
            } else {
                serde_json::to_string(&report)?
            };
            println!("{json}");
        }
        Commands::Simulate { config, out, seed, reps, chunks, methods } => {
            let mut config = simulate::load_config(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(reps) = reps {
                config.grid.reps = Some(reps);
            }
            if let Some(chunks) = chunks {
                config.chunks = chunks;
            }
            if let Some(methods) = methods {
                config.methods = Some(methods);
            }
            let output = simulate::run_grid(&config)?;
            simulate::write_outputs(&out, &output)?;
            eprintln!(
                "wrote {} and {} ({} cells)",
                out.join("results.csv").display(),
                out.join("metadata.json").display(),
                output.cells
            );
        }
        Commands::Report { results, family, out, alpha, f, sigma2t } => {
            let rows = report::read_results_csv(&results)?;
            let family = report::Family::parse(&family)?;
            let options = report::ReportOptions { alpha, f, sigma2_t: sigma2t };
            let (svg_path, csv_path) = report::write_family(&rows, family, &options, &out)?;
            eprintln!("wrote {} and {}", svg_path.display(), csv_path.display());
        }
        Commands::Pivot { results, metric, out } => {
            let rows = report::read_results_csv(&results)?;
            let table = pivot(&rows, &metric)?;
            match out {
                Some(path) => std::fs::write(&path, table)
                    .with_context(|| format!("cannot write {}", path.display()))?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

/// Wide table: one row per cell, one column per method carrying `metric`.
fn pivot(rows: &[report::ResultRow], metric: &str) -> Result<String> {
    let selected: Vec<&report::ResultRow> = rows.iter().filter(|r| r.metric == metric).collect();
    if selected.is_empty() {
        let metrics: BTreeSet<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
        bail!(
            "no rows with metric `{metric}`; available: {}",
            metrics.into_iter().collect::<Vec<_>>().join(", ")
        );
    }
    let methods: Vec<&str> = {
        let set: BTreeSet<&str> = selected.iter().map(|r| r.method.as_str()).collect();
        set.into_iter().collect()
    };
    let cells: Vec<&str> = {
        let mut seen = BTreeSet::new();
        selected
            .iter()
            .filter(|r| seen.insert(r.cell_id.as_str()))
            .map(|r| r.cell_id.as_str())
            .collect()
    };
    let mut out = String::from("cell_id,K,n_pattern,f,sigma2T,tau2");
    for method in &methods {
        let _ = write!(out, ",{method}");
    }
    out.push('\n');
    for cell in cells {
        let any = selected.iter().find(|r| r.cell_id == cell).unwrap();
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            any.cell_id, any.k, any.n_pattern, any.f, any.sigma2_t, any.tau2
        );
        for method in &methods {
            match selected.iter().find(|r| r.cell_id == cell && r.method == *method) {
                Some(r) => {
                    let _ = write!(out, ",{}", r.value);
                }
                None => out.push_str(",NA"),
            }
        }
        out.push('\n');
    }
    Ok(out)
}
