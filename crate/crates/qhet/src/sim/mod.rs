//! Deterministic, parallel Monte Carlo engine for level, power, and bias
//! experiments on the heterogeneity statistics.
//!
//! Every replication owns an RNG stream keyed by (seed, cell, replication
//! index), and aggregation walks replications in index order, so a cell's
//! result is a pure function of (scenario, methods, seed) — chunking and
//! thread scheduling never change the output bytes.

mod rng;

pub use rng::CounterRng;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::meta::{
    effective_sample_size_weights, inverse_variance_weights, q_statistic, ModelState,
    StudySummary, WeightScheme,
};
use crate::moments::{md_unconditional_moments, q_moments};
use crate::numerics::chi2_sf;
use crate::qdist::{bj_iv, exact_weighted_chi2, m2_approx, m3_approx, welch_iv};
use crate::tau::{dl, mandel_paule, reml, sdl, TauMethod};
use crate::Result;

/// Human-readable description of the generator pipeline, recorded in run
/// metadata so results stay auditable.
pub const RNG_DESCRIPTION: &str =
    "splitmix64 counter stream keyed by (seed, cell, replication); normal deviates by \
     inverse-CDF (PPND16); chi-square deviates by Marsaglia-Tsang gamma sampling";

/// The empirical p-value grid at which #(p̃ < p) is recorded.
pub const P_GRID: [f64; 17] = [
    0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99, 0.995,
    0.9975, 0.999,
];

/// Nominal test levels at which null-calibrated rejections are recorded.
pub const ALPHA_GRID: [f64; 4] = [0.001, 0.005, 0.01, 0.05];

/// Base unequal-size patterns: mean study size -> the K = 5 totals.
/// Larger K repeats the base vector.
pub const UNEQUAL_PATTERNS: [(u32, [u32; 5]); 6] = [
    (13, [4, 6, 7, 8, 40]),
    (15, [6, 8, 9, 10, 42]),
    (30, [12, 16, 18, 20, 84]),
    (60, [24, 32, 36, 40, 168]),
    (100, [64, 72, 76, 80, 208]),
    (160, [124, 132, 136, 140, 268]),
];

/// One simulation configuration cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub k: usize,
    /// Total study sizes n_i (length K).
    pub sizes: Vec<u32>,
    /// Fraction of each study's sample in the control arm.
    pub ctrl_fraction: f64,
    pub sigma2_treat: f64,
    pub sigma2_ctrl: f64,
    pub tau2: f64,
    pub mu: f64,
    pub reps: usize,
    /// Label for the size pattern, e.g. "n20" or "u13".
    pub pattern: String,
}

impl Scenario {
    /// Equal study sizes n.
    pub fn equal(
        k: usize,
        n: u32,
        ctrl_fraction: f64,
        sigma2_treat: f64,
        sigma2_ctrl: f64,
        tau2: f64,
        reps: usize,
    ) -> Result<Self> {
        let scenario = Scenario {
            k,
            sizes: vec![n; k],
            ctrl_fraction,
            sigma2_treat,
            sigma2_ctrl,
            tau2,
            mu: 0.0,
            reps,
            pattern: format!("n{n}"),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Unequal sizes from the named n̄ pattern, the base vector repeated
    /// K/5 times.
    pub fn unequal(
        k: usize,
        nbar: u32,
        ctrl_fraction: f64,
        sigma2_treat: f64,
        sigma2_ctrl: f64,
        tau2: f64,
        reps: usize,
    ) -> Result<Self> {
        let base = UNEQUAL_PATTERNS
            .iter()
            .find(|(key, _)| *key == nbar)
            .map(|(_, sizes)| *sizes)
            .ok_or_else(|| Error::UnknownPattern(format!("nbar = {nbar}")))?;
        if !k.is_multiple_of(base.len()) {
            return Err(Error::InvalidScenario(format!(
                "K = {k} is not a multiple of the base pattern length {}",
                base.len()
            )));
        }
        let sizes: Vec<u32> = base.iter().cycle().take(k).copied().collect();
        let scenario = Scenario {
            k,
            sizes,
            ctrl_fraction,
            sigma2_treat,
            sigma2_ctrl,
            tau2,
            mu: 0.0,
            reps,
            pattern: format!("u{nbar}"),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Arm sizes for study i: n_T = ⌈(1 − f)·n⌉ and n_C = n − n_T.
    pub fn arm_sizes(&self, i: usize) -> (u32, u32) {
        split_arms(self.sizes[i], self.ctrl_fraction)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidScenario(format!("K = {} is below 2", self.k)));
        }
        if self.sizes.len() != self.k {
            return Err(Error::InvalidScenario(format!(
                "sizes length {} does not match K = {}",
                self.sizes.len(),
                self.k
            )));
        }
        if !(self.ctrl_fraction > 0.0 && self.ctrl_fraction < 1.0) {
            return Err(Error::InvalidScenario(format!(
                "control fraction must lie in (0, 1), got {}",
                self.ctrl_fraction
            )));
        }
        if !(self.sigma2_treat > 0.0) || !(self.sigma2_ctrl > 0.0) {
            return Err(Error::InvalidScenario("within-study variances must be positive".into()));
        }
        if !(self.tau2 >= 0.0) {
            return Err(Error::InvalidScenario(format!("tau2 must be nonnegative, got {}", self.tau2)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidScenario("reps must be positive".into()));
        }
        for i in 0..self.k {
            let (nt, nc) = self.arm_sizes(i);
            if nt < 2 || nc < 2 {
                return Err(Error::InvalidScenario(format!(
                    "study {i} (n = {}) splits into arms ({nt}, {nc}); both need at least 2",
                    self.sizes[i]
                )));
            }
        }
        Ok(())
    }

    /// Stable textual identifier of the cell.
    pub fn cell_id(&self) -> String {
        format!(
            "{}_K{}_f{}_sT{}_t{}",
            self.pattern, self.k, self.ctrl_fraction, self.sigma2_treat, self.tau2
        )
    }

    /// Stable 64-bit key feeding the replication RNG streams.
    pub fn cell_key(&self) -> u64 {
        fnv1a(self.cell_id().as_bytes())
    }
}

/// Arm split rule shared by the simulator and the CLI.
pub fn split_arms(n: u32, ctrl_fraction: f64) -> (u32, u32) {
    // The epsilon guards against ties like 0.4·20 = 8.000000000000002.
    let raw = (1.0 - ctrl_fraction) * n as f64;
    let nt = (raw - 1e-9).ceil().max(0.0) as u32;
    (nt, n - nt)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Distribution approximations the runner can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    FarebrotherSw,
    M2Sw,
    M3Sw,
    ChiSquareIv,
    WelchIv,
    BjIv,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::FarebrotherSw,
        Method::M2Sw,
        Method::M3Sw,
        Method::ChiSquareIv,
        Method::WelchIv,
        Method::BjIv,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::FarebrotherSw => "FSW",
            Method::M2Sw => "M2SW",
            Method::M3Sw => "M3SW",
            Method::ChiSquareIv => "Chi2IV",
            Method::WelchIv => "WelchIV",
            Method::BjIv => "BJIV",
        }
    }

    fn index(&self) -> usize {
        Method::ALL.iter().position(|m| m == self).unwrap()
    }
}

/// Which approximations and estimators a run evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSet {
    pub distributions: Vec<Method>,
    pub estimators: Vec<TauMethod>,
}

impl MethodSet {
    /// Everything: all six approximations and all four estimators.
    pub fn full() -> Self {
        MethodSet { distributions: Method::ALL.to_vec(), estimators: TauMethod::ALL.to_vec() }
    }

    /// Parse names like "fsw", "m2sw", "chi2", "welch", "bj", "sdl", "dl",
    /// "mp", "reml" (case-insensitive).
    pub fn from_names(names: &[String]) -> Result<Self> {
        let mut set = MethodSet { distributions: Vec::new(), estimators: Vec::new() };
        for name in names {
            match name.to_ascii_lowercase().as_str() {
                "fsw" | "farebrother" => set.distributions.push(Method::FarebrotherSw),
                "m2sw" | "m2" => set.distributions.push(Method::M2Sw),
                "m3sw" | "m3" => set.distributions.push(Method::M3Sw),
                "chi2" | "chi2iv" => set.distributions.push(Method::ChiSquareIv),
                "welch" | "welchiv" => set.distributions.push(Method::WelchIv),
                "bj" | "bjiv" => set.distributions.push(Method::BjIv),
                "sdl" => set.estimators.push(TauMethod::Sdl),
                "dl" => set.estimators.push(TauMethod::Dl),
                "mp" => set.estimators.push(TauMethod::Mp),
                "reml" => set.estimators.push(TauMethod::Reml),
                other => return Err(Error::UnknownPattern(format!("method {other}"))),
            }
        }
        Ok(set)
    }

    fn has(&self, m: Method) -> bool {
        self.distributions.contains(&m)
    }
}

/// How non-null approximation parameters obtain τ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tau2Policy {
    /// Use the scenario's generating τ² (the simulation-study convention).
    Generating,
    /// Plug in an estimate recomputed from each replication's data.
    Estimated(TauMethod),
    /// A fixed externally supplied value.
    Fixed(f64),
}

/// Which variances the generated summaries carry: sampled s²_ij as in
/// practice, or the true σ²_ij for exact-law oracle runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceMode {
    Estimated,
    Known,
}

/// Per-method empirical counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCounts {
    pub method: Method,
    /// #(p̃ < p) at each entry of [`P_GRID`], with the approximation
    /// parameterized by the policy τ² (the generating value by default).
    pub grid_counts: [u64; 17],
    /// #(p̃₀ < α) at each entry of [`ALPHA_GRID`], with the approximation
    /// parameterized by τ² = 0 (the test actually run in practice).
    pub reject_counts: [u64; 4],
}

/// Per-estimator aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauStats {
    pub method: TauMethod,
    pub mean: f64,
    pub bias: f64,
    pub truncated_count: u64,
}

/// Aggregated outcome of one simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub cell_id: String,
    pub reps: usize,
    pub methods: Vec<MethodCounts>,
    pub estimators: Vec<TauStats>,
    pub m3_failures: u64,
}

/// One study's simulated summary: sample variances from scaled chi-square
/// draws and the effect from a normal with the full unconditional variance.
pub fn generate_study(rng: &mut CounterRng, scenario: &Scenario, i: usize) -> Result<StudySummary> {
    let (nt, nc) = checked_arms(scenario, i)?;
    let s2_treat =
        scenario.sigma2_treat * rng.chi_square((nt - 1) as f64) / (nt - 1) as f64;
    let s2_ctrl = scenario.sigma2_ctrl * rng.chi_square((nc - 1) as f64) / (nc - 1) as f64;
    let effect = scenario.mu + effect_sd(scenario, nt, nc) * rng.standard_normal();
    StudySummary::new(nt, nc, s2_treat, s2_ctrl, effect)
}

/// Known-variance variant for oracles: the variance fields carry the true
/// σ²_ij rather than sampled s²_ij.
pub fn generate_study_known(
    rng: &mut CounterRng,
    scenario: &Scenario,
    i: usize,
) -> Result<StudySummary> {
    let (nt, nc) = checked_arms(scenario, i)?;
    let effect = scenario.mu + effect_sd(scenario, nt, nc) * rng.standard_normal();
    StudySummary::new(nt, nc, scenario.sigma2_treat, scenario.sigma2_ctrl, effect)
}

fn checked_arms(scenario: &Scenario, i: usize) -> Result<(u32, u32)> {
    let (nt, nc) = scenario.arm_sizes(i);
    if nt < 2 || nc < 2 {
        return Err(Error::InvalidScenario(format!(
            "study {i} arms ({nt}, {nc}) leave no degrees of freedom"
        )));
    }
    Ok((nt, nc))
}

fn effect_sd(scenario: &Scenario, nt: u32, nc: u32) -> f64 {
    (scenario.sigma2_treat / nt as f64 + scenario.sigma2_ctrl / nc as f64 + scenario.tau2).sqrt()
}

#[derive(Debug, Clone)]
struct RepOutcome {
    p_policy: [Option<f64>; 6],
    p_null: [Option<f64>; 6],
    tau: [Option<(f64, bool)>; 4],
    m3_failed: bool,
}

/// Run one cell: `reps` replications in `chunks` parallel slices.
///
/// Approximations are parameterized by the generating τ² (and by τ² = 0
/// for the null-calibrated rejection counts). The output is bitwise
/// independent of `chunks` and of thread scheduling.
pub fn run_cell(
    scenario: &Scenario,
    methods: &MethodSet,
    seed: u64,
    chunks: usize,
) -> Result<RunResult> {
    run_cell_with(scenario, methods, seed, chunks, Tau2Policy::Generating)
}

/// [`run_cell`] with an explicit τ² plug-in policy for the non-null
/// approximation parameters.
pub fn run_cell_with(
    scenario: &Scenario,
    methods: &MethodSet,
    seed: u64,
    chunks: usize,
    policy: Tau2Policy,
) -> Result<RunResult> {
    scenario.validate()?;
    let chunks = chunks.max(1);
    let cell_key = scenario.cell_key();

    // Constant pieces shared by all replications.
    let arm_templates: Vec<StudySummary> = (0..scenario.k)
        .map(|i| {
            let (nt, nc) = scenario.arm_sizes(i);
            StudySummary::new(nt, nc, 1.0, 1.0, 0.0)
        })
        .collect::<Result<_>>()?;
    let sw_scheme = effective_sample_size_weights(&arm_templates)?;

    let mut outcomes: Vec<Option<Result<RepOutcome>>> = vec![None; scenario.reps];
    let chunk_size = scenario.reps.div_ceil(chunks);
    outcomes
        .par_chunks_mut(chunk_size)
        .enumerate()
        .for_each(|(chunk_index, slice)| {
            let base = chunk_index * chunk_size;
            for (offset, slot) in slice.iter_mut().enumerate() {
                let rep = (base + offset) as u64;
                *slot = Some(run_replication(
                    scenario,
                    methods,
                    &sw_scheme,
                    seed,
                    cell_key,
                    rep,
                    policy,
                    VarianceMode::Estimated,
                ));
            }
        });

    // Sequential merge in replication order keeps aggregation exact and
    // layout-independent.
    let mut method_counts: Vec<MethodCounts> = methods
        .distributions
        .iter()
        .map(|&method| MethodCounts { method, grid_counts: [0; 17], reject_counts: [0; 4] })
        .collect();
    let mut tau_sums = vec![(0.0f64, 0.0f64, 0u64); methods.estimators.len()]; // (sum, comp, truncations)
    let mut m3_failures = 0u64;

    for slot in outcomes {
        let outcome = slot.expect("every slot filled")?;
        if outcome.m3_failed {
            m3_failures += 1;
        }
        for counts in method_counts.iter_mut() {
            let idx = counts.method.index();
            if let Some(p) = outcome.p_policy[idx] {
                for (slot, &threshold) in counts.grid_counts.iter_mut().zip(P_GRID.iter()) {
                    if p < threshold {
                        *slot += 1;
                    }
                }
            }
            if let Some(p0) = outcome.p_null[idx] {
                for (slot, &alpha) in counts.reject_counts.iter_mut().zip(ALPHA_GRID.iter()) {
                    if p0 < alpha {
                        *slot += 1;
                    }
                }
            }
        }
        for (pos, &est) in methods.estimators.iter().enumerate() {
            let (value, truncated) =
                outcome.tau[tau_index(est)].expect("requested estimator computed");
            // Kahan accumulation: the merge order is fixed, compensation
            // keeps 10^4-term sums exact to the last bit in practice.
            let (sum, comp, truncs) = &mut tau_sums[pos];
            let y = value - *comp;
            let t = *sum + y;
            *comp = (t - *sum) - y;
            *sum = t;
            if truncated {
                *truncs += 1;
            }
        }
    }

    let estimators = methods
        .estimators
        .iter()
        .zip(tau_sums)
        .map(|(&method, (sum, _, truncated_count))| {
            let mean = sum / scenario.reps as f64;
            TauStats { method, mean, bias: mean - scenario.tau2, truncated_count }
        })
        .collect();

    Ok(RunResult {
        cell_id: scenario.cell_id(),
        reps: scenario.reps,
        methods: method_counts,
        estimators,
        m3_failures,
    })
}

fn tau_index(method: TauMethod) -> usize {
    TauMethod::ALL.iter().position(|m| *m == method).unwrap()
}

#[allow(clippy::too_many_arguments)]
fn run_replication(
    scenario: &Scenario,
    methods: &MethodSet,
    sw_scheme: &WeightScheme,
    seed: u64,
    cell_key: u64,
    rep: u64,
    policy: Tau2Policy,
    variance_mode: VarianceMode,
) -> Result<RepOutcome> {
    let mut rng = CounterRng::from_key_parts(&[seed, cell_key, rep]);
    let studies: Vec<StudySummary> = (0..scenario.k)
        .map(|i| match variance_mode {
            VarianceMode::Estimated => generate_study(&mut rng, scenario, i),
            VarianceMode::Known => generate_study_known(&mut rng, scenario, i),
        })
        .collect::<Result<_>>()?;
    let effects: Vec<f64> = studies.iter().map(|s| s.effect).collect();
    let cond_vars: Vec<f64> = studies.iter().map(|s| s.cond_var()).collect();

    let mut outcome = RepOutcome {
        p_policy: [None; 6],
        p_null: [None; 6],
        tau: [None; 4],
        m3_failed: false,
    };

    // Estimators first: a plug-in policy may need one of them.
    let wanted_estimators: Vec<TauMethod> = {
        let mut list = methods.estimators.clone();
        if let Tau2Policy::Estimated(est) = policy {
            if !list.contains(&est) {
                list.push(est);
            }
        }
        list
    };
    for est in wanted_estimators {
        let estimate = match est {
            TauMethod::Sdl => sdl(&studies, sw_scheme)?,
            TauMethod::Dl => dl(&studies)?,
            TauMethod::Mp => mandel_paule(&studies)?,
            TauMethod::Reml => reml(&studies)?,
        };
        outcome.tau[tau_index(est)] = Some((estimate.value, estimate.truncated));
    }

    let tau2_param = match policy {
        Tau2Policy::Generating => scenario.tau2,
        Tau2Policy::Fixed(value) => value,
        Tau2Policy::Estimated(est) => outcome.tau[tau_index(est)].expect("computed above").0,
    };

    let needs_sw = methods.has(Method::FarebrotherSw)
        || methods.has(Method::M2Sw)
        || methods.has(Method::M3Sw);
    let needs_iv = methods.has(Method::ChiSquareIv)
        || methods.has(Method::WelchIv)
        || methods.has(Method::BjIv);

    if needs_sw {
        let q_sw = q_statistic(&effects, sw_scheme)?;
        if methods.has(Method::FarebrotherSw) {
            let idx = Method::FarebrotherSw.index();
            let gen_state = ModelState::new(tau2_param, cond_vars.clone(), scenario.mu)?;
            let law = exact_weighted_chi2(&gen_state, sw_scheme)?;
            outcome.p_policy[idx] = Some(law.upper_tail(q_sw)?);
            outcome.p_null[idx] = Some(if tau2_param == 0.0 {
                outcome.p_policy[idx].unwrap()
            } else {
                let null_state = ModelState::new(0.0, cond_vars.clone(), scenario.mu)?;
                exact_weighted_chi2(&null_state, sw_scheme)?.upper_tail(q_sw)?
            });
        }
        if methods.has(Method::M2Sw) || methods.has(Method::M3Sw) {
            let moments_for = |tau2: f64| -> Result<crate::moments::QMoments> {
                let state = ModelState::new(tau2, cond_vars.clone(), scenario.mu)?;
                q_moments(&md_unconditional_moments(&state), sw_scheme)
            };
            let qm_policy = moments_for(tau2_param)?;
            let qm_null = if tau2_param == 0.0 { qm_policy } else { moments_for(0.0)? };
            if methods.has(Method::M2Sw) {
                let idx = Method::M2Sw.index();
                outcome.p_policy[idx] = Some(m2_approx(&qm_policy)?.upper_tail(q_sw)?);
                outcome.p_null[idx] = Some(m2_approx(&qm_null)?.upper_tail(q_sw)?);
            }
            if methods.has(Method::M3Sw) {
                let idx = Method::M3Sw.index();
                match m3_approx(&qm_policy) {
                    Ok(law) => outcome.p_policy[idx] = Some(law.upper_tail(q_sw)?),
                    Err(Error::M3Breakdown { .. }) => outcome.m3_failed = true,
                    Err(other) => return Err(other),
                }
                match m3_approx(&qm_null) {
                    Ok(law) => outcome.p_null[idx] = Some(law.upper_tail(q_sw)?),
                    Err(Error::M3Breakdown { .. }) => outcome.m3_failed = true,
                    Err(other) => return Err(other),
                }
            }
        }
    }

    if needs_iv {
        let iv_scheme = inverse_variance_weights(&studies, 0.0)?;
        let q_iv = q_statistic(&effects, &iv_scheme)?;
        let df = (scenario.k - 1) as f64;
        if methods.has(Method::ChiSquareIv) {
            let idx = Method::ChiSquareIv.index();
            let p = chi2_sf(q_iv, df)?;
            outcome.p_policy[idx] = Some(p);
            outcome.p_null[idx] = Some(p);
        }
        if methods.has(Method::WelchIv) {
            let idx = Method::WelchIv.index();
            let p = welch_iv(&studies)?.upper_tail(q_iv)?;
            outcome.p_policy[idx] = Some(p);
            outcome.p_null[idx] = Some(p);
        }
        if methods.has(Method::BjIv) {
            let idx = Method::BjIv.index();
            outcome.p_policy[idx] = Some(if tau2_param == 0.0 {
                // At τ² = 0 the BJ law is exactly χ²_{K−1}.
                chi2_sf(q_iv, df)?
            } else {
                bj_iv(&studies, tau2_param)?.upper_tail(q_iv)?
            });
            outcome.p_null[idx] = Some(chi2_sf(q_iv, df)?);
        }
    }

    Ok(outcome)
}

impl RunResult {
    /// Long-format CSV rows (no header):
    /// `cell_id,K,n_pattern,f,sigma2T,tau2,method,metric,value`.
    pub fn csv_rows(&self, scenario: &Scenario) -> String {
        let mut out = String::new();
        let prefix = format!(
            "{},{},{},{},{},{}",
            self.cell_id,
            scenario.k,
            scenario.pattern,
            scenario.ctrl_fraction,
            scenario.sigma2_treat,
            scenario.tau2
        );
        let reps = self.reps as f64;
        for counts in &self.methods {
            let name = counts.method.name();
            for (count, p) in counts.grid_counts.iter().zip(P_GRID.iter()) {
                out.push_str(&format!(
                    "{prefix},{name},phat@{p},{}\n",
                    *count as f64 / reps
                ));
            }
            let metric = if scenario.tau2 == 0.0 { "level" } else { "power" };
            for (count, alpha) in counts.reject_counts.iter().zip(ALPHA_GRID.iter()) {
                out.push_str(&format!(
                    "{prefix},{name},{metric}@{alpha},{}\n",
                    *count as f64 / reps
                ));
            }
            if counts.method == Method::M3Sw {
                out.push_str(&format!("{prefix},{name},m3_failures,{}\n", self.m3_failures));
            }
        }
        for stats in &self.estimators {
            let name = stats.method.name();
            out.push_str(&format!("{prefix},{name},mean_tau2,{}\n", stats.mean));
            out.push_str(&format!("{prefix},{name},bias,{}\n", stats.bias));
            out.push_str(&format!(
                "{prefix},{name},truncated_share,{}\n",
                stats.truncated_count as f64 / reps
            ));
        }
        out
    }

    /// CSV header matching [`RunResult::csv_rows`].
    pub fn csv_header() -> &'static str {
        "cell_id,K,n_pattern,f,sigma2T,tau2,method,metric,value"
    }

    /// Empirical p̂ at a grid point for one method, if it was run.
    pub fn phat(&self, method: Method, p: f64) -> Option<f64> {
        let grid_pos = P_GRID.iter().position(|&g| g == p)?;
        self.methods
            .iter()
            .find(|c| c.method == method)
            .map(|c| c.grid_counts[grid_pos] as f64 / self.reps as f64)
    }

    /// Null-calibrated rejection rate at a nominal α, if available.
    pub fn rejection_rate(&self, method: Method, alpha: f64) -> Option<f64> {
        let pos = ALPHA_GRID.iter().position(|&g| g == alpha)?;
        self.methods
            .iter()
            .find(|c| c.method == method)
            .map(|c| c.reject_counts[pos] as f64 / self.reps as f64)
    }

    pub fn tau_stats(&self, method: TauMethod) -> Option<&TauStats> {
        self.estimators.iter().find(|s| s.method == method)
    }
}

/// The per-replication p̃ values of a single method, in replication
/// order, parameterized by the generating τ². `None` marks an M3
/// breakdown. Useful for uniformity diagnostics on the recorded p̃;
/// with `VarianceMode::Known` the Farebrother p̃ follow the exact law,
/// so they are uniform by construction.
pub fn collect_p_values(
    scenario: &Scenario,
    method: Method,
    seed: u64,
    chunks: usize,
    variance_mode: VarianceMode,
) -> Result<Vec<Option<f64>>> {
    scenario.validate()?;
    let chunks = chunks.max(1);
    let cell_key = scenario.cell_key();
    let arm_templates: Vec<StudySummary> = (0..scenario.k)
        .map(|i| {
            let (nt, nc) = scenario.arm_sizes(i);
            StudySummary::new(nt, nc, 1.0, 1.0, 0.0)
        })
        .collect::<Result<_>>()?;
    let sw_scheme = effective_sample_size_weights(&arm_templates)?;
    let methods = MethodSet { distributions: vec![method], estimators: Vec::new() };

    let mut outcomes: Vec<Option<Result<RepOutcome>>> = vec![None; scenario.reps];
    let chunk_size = scenario.reps.div_ceil(chunks);
    outcomes
        .par_chunks_mut(chunk_size)
        .enumerate()
        .for_each(|(chunk_index, slice)| {
            let base = chunk_index * chunk_size;
            for (offset, slot) in slice.iter_mut().enumerate() {
                let rep = (base + offset) as u64;
                *slot = Some(run_replication(
                    scenario,
                    &methods,
                    &sw_scheme,
                    seed,
                    cell_key,
                    rep,
                    Tau2Policy::Generating,
                    variance_mode,
                ));
            }
        });

    outcomes
        .into_iter()
        .map(|slot| slot.expect("every slot filled").map(|o| o.p_policy[method.index()]))
        .collect()
}

/// Named size pattern family for a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizePattern {
    Equal,
    Unequal,
}

/// A grid request: pattern family plus optional subsets of the design
/// values; missing entries default to the full design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub pattern: SizePattern,
    #[serde(default)]
    pub n: Option<Vec<u32>>,
    #[serde(default)]
    pub k: Option<Vec<usize>>,
    #[serde(default)]
    pub f: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma2_t: Option<Vec<f64>>,
    #[serde(default)]
    pub sigma2_c: Option<f64>,
    #[serde(default)]
    pub tau2: Option<Vec<f64>>,
    #[serde(default)]
    pub reps: Option<usize>,
}

impl GridConfig {
    pub fn equal_defaults() -> Self {
        GridConfig {
            pattern: SizePattern::Equal,
            n: None,
            k: None,
            f: None,
            sigma2_t: None,
            sigma2_c: None,
            tau2: None,
            reps: None,
        }
    }
}

/// Default τ² grid 0.0(0.1)1.0.
pub fn default_tau2_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Expand a grid request into the full cross-product of scenarios.
///
/// For unequal sizes the default n̄ sets follow the two-set design:
/// {13, 15, 30, 60} for f = .5 and {15, 30, 60, 100} for f = .75; the
/// (n̄ = 13, f = .75) cell is always excluded because its smallest
/// treatment arm would drop below 2.
pub fn scenario_grid(config: &GridConfig) -> Result<Vec<Scenario>> {
    let k_values = config.k.clone().unwrap_or_else(|| vec![5, 10, 30]);
    let f_values = config.f.clone().unwrap_or_else(|| vec![0.5, 0.75]);
    let sigma2_t_values = config.sigma2_t.clone().unwrap_or_else(|| vec![1.0, 2.0]);
    let sigma2_c = config.sigma2_c.unwrap_or(1.0);
    let tau2_values = config.tau2.clone().unwrap_or_else(default_tau2_grid);
    let reps = config.reps.unwrap_or(10_000);

    let mut scenarios = Vec::new();
    for &f in &f_values {
        let n_values: Vec<u32> = match (config.n.clone(), config.pattern) {
            (Some(values), _) => values,
            (None, SizePattern::Equal) => vec![20, 40, 100, 250],
            (None, SizePattern::Unequal) => {
                if f <= 0.5 {
                    vec![13, 15, 30, 60]
                } else {
                    vec![15, 30, 60, 100]
                }
            }
        };
        for &n in &n_values {
            if config.pattern == SizePattern::Unequal && n == 13 && f > 0.5 {
                // The treatment arms of the n̄ = 13 pattern would fall to 1.
                continue;
            }
            for &k in &k_values {
                for &s2t in &sigma2_t_values {
                    for &tau2 in &tau2_values {
                        let scenario = match config.pattern {
                            SizePattern::Equal => Scenario::equal(k, n, f, s2t, sigma2_c, tau2, reps),
                            SizePattern::Unequal => {
                                Scenario::unequal(k, n, f, s2t, sigma2_c, tau2, reps)
                            }
                        }?;
                        scenarios.push(scenario);
                    }
                }
            }
        }
    }
    Ok(scenarios)
}

/// Two-sided Kolmogorov–Smirnov statistic of a sample against U(0, 1).
pub fn ks_uniform_statistic(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let upper = (i + 1) as f64 / n - x;
        let lower = x - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    d
}

/// Asymptotic Kolmogorov survival function P(√n·D > t) = 2 Σ (−1)^{k−1} e^{−2k²t²}.
pub fn kolmogorov_asymptotic_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        if term < 1e-16 {
            break;
        }
        sum += if k % 2 == 1 { term } else { -term };
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_scenario(tau2: f64, reps: usize) -> Scenario {
        Scenario::equal(5, 20, 0.5, 1.0, 1.0, tau2, reps).unwrap()
    }

    #[test]
    fn arm_split_matches_ceiling_rule() {
        assert_eq!(split_arms(20, 0.5), (10, 10));
        assert_eq!(split_arms(7, 0.5), (4, 3));
        assert_eq!(split_arms(20, 0.75), (5, 15));
        assert_eq!(split_arms(13, 0.75), (4, 9));
        // Floating-point products like 0.4·20 = 8.000000000000002 still
        // give the exact ceiling.
        assert_eq!(split_arms(20, 0.6), (8, 12));
    }

    #[test]
    fn unequal_pattern_replicates_base() {
        let scenario = Scenario::unequal(10, 13, 0.5, 1.0, 1.0, 0.0, 100).unwrap();
        assert_eq!(scenario.sizes, vec![4, 6, 7, 8, 40, 4, 6, 7, 8, 40]);
        let scenario = Scenario::unequal(30, 60, 0.5, 1.0, 1.0, 0.0, 100).unwrap();
        assert_eq!(scenario.sizes.len(), 30);
        assert_eq!(&scenario.sizes[25..], &[24, 32, 36, 40, 168]);
    }

    #[test]
    fn smallest_pattern_with_unbalanced_arms_is_rejected() {
        // n̄ = 13 with f = .75 gives a treatment arm of 1.
        assert!(Scenario::unequal(5, 13, 0.75, 1.0, 1.0, 0.0, 100).is_err());
    }

    #[test]
    fn unknown_pattern_is_an_error() {
        assert!(matches!(
            Scenario::unequal(5, 17, 0.5, 1.0, 1.0, 0.0, 100),
            Err(Error::UnknownPattern(_))
        ));
    }

    #[test]
    fn equal_grid_counts_match_the_design() {
        let config = GridConfig::equal_defaults();
        let grid = scenario_grid(&config).unwrap();
        assert_eq!(grid.len(), 3 * 4 * 2 * 2 * 11);
    }

    #[test]
    fn unequal_grid_uses_two_sets() {
        let mut config = GridConfig::equal_defaults();
        config.pattern = SizePattern::Unequal;
        let grid = scenario_grid(&config).unwrap();
        let f75_nbars: std::collections::BTreeSet<String> = grid
            .iter()
            .filter(|s| s.ctrl_fraction > 0.5)
            .map(|s| s.pattern.clone())
            .collect();
        assert_eq!(
            f75_nbars.into_iter().collect::<Vec<_>>(),
            vec!["u100", "u15", "u30", "u60"]
        );
        let f50_nbars: std::collections::BTreeSet<String> = grid
            .iter()
            .filter(|s| s.ctrl_fraction <= 0.5)
            .map(|s| s.pattern.clone())
            .collect();
        assert_eq!(
            f50_nbars.into_iter().collect::<Vec<_>>(),
            vec!["u13", "u15", "u30", "u60"]
        );
    }

    #[test]
    fn generator_moments_match_the_design() {
        // E(s²) = σ², E(y) = μ, Var(y) = σ²_T/n_T + σ²_C/n_C + τ².
        let scenario = Scenario::equal(2, 20, 0.5, 2.0, 1.0, 0.5, 1).unwrap();
        let n = 200_000usize;
        let mut rng = CounterRng::from_key_parts(&[99]);
        let (mut sum_s2t, mut sum_s2c, mut sum_y, mut sum_y2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let s = generate_study(&mut rng, &scenario, 0).unwrap();
            sum_s2t += s.var_treat;
            sum_s2c += s.var_ctrl;
            sum_y += s.effect;
            sum_y2 += s.effect * s.effect;
        }
        let nf = n as f64;
        let target_var = 2.0 / 10.0 + 1.0 / 10.0 + 0.5;
        assert!((sum_s2t / nf - 2.0).abs() < 0.01);
        assert!((sum_s2c / nf - 1.0).abs() < 0.01);
        assert!((sum_y / nf).abs() < 4.0 * (target_var / nf).sqrt());
        let var_y = sum_y2 / nf - (sum_y / nf).powi(2);
        // s.e. of a variance estimate is roughly var·sqrt(2/n).
        assert!((var_y - target_var).abs() < 5.0 * target_var * (2.0 / nf).sqrt());
    }

    #[test]
    fn run_cell_is_chunk_invariant() {
        let scenario = small_scenario(0.3, 200);
        let methods = MethodSet::full();
        let base = run_cell(&scenario, &methods, 7, 1).unwrap();
        for chunks in [2usize, 4, 10, 64] {
            let other = run_cell(&scenario, &methods, 7, chunks).unwrap();
            assert_eq!(base, other, "chunks = {chunks}");
            assert_eq!(base.csv_rows(&scenario), other.csv_rows(&scenario));
        }
    }

    #[test]
    fn run_cell_depends_on_seed() {
        let scenario = small_scenario(0.0, 200);
        let methods = MethodSet::full();
        let a = run_cell(&scenario, &methods, 1, 4).unwrap();
        let b = run_cell(&scenario, &methods, 2, 4).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn estimated_policy_runs() {
        let scenario = small_scenario(0.5, 50);
        let methods = MethodSet::from_names(&["fsw".into(), "sdl".into()]).unwrap();
        let result =
            run_cell_with(&scenario, &methods, 3, 2, Tau2Policy::Estimated(TauMethod::Sdl))
                .unwrap();
        assert_eq!(result.reps, 50);
        assert!(result.phat(Method::FarebrotherSw, 0.5).is_some());
    }

    #[test]
    fn csv_rows_have_the_documented_shape() {
        let scenario = small_scenario(0.0, 50);
        let methods = MethodSet::from_names(&["fsw".into(), "m3".into(), "sdl".into()]).unwrap();
        let result = run_cell(&scenario, &methods, 11, 2).unwrap();
        let rows = result.csv_rows(&scenario);
        for line in rows.lines() {
            assert_eq!(line.split(',').count(), 9, "bad row: {line}");
            assert!(line.starts_with("n20_K5_f0.5_sT1_t0,5,n20,0.5,1,0,"));
        }
        assert!(rows.contains(",FSW,level@0.05,"));
        assert!(rows.contains(",M3SW,m3_failures,"));
        assert!(rows.contains(",SDL,bias,"));
        assert!(!rows.contains("power@"), "null cell must label levels");
    }

    #[test]
    fn ks_helpers() {
        // Perfectly uniform grid: tiny statistic.
        let sample: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform_statistic(&sample) < 0.001);
        // Known asymptotic values: sf(1.36) ≈ 0.05, sf(1.63) ≈ 0.01.
        assert!((kolmogorov_asymptotic_sf(1.36) - 0.05).abs() < 0.002);
        assert!((kolmogorov_asymptotic_sf(1.63) - 0.01).abs() < 0.001);
    }
}
