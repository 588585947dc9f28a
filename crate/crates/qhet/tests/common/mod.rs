//! Shared oracles for the integration and acceptance tests: direct-loop
//! evaluations of the multi-index moment formulas, and Monte Carlo
//! machinery for the law of Q. Everything here is deliberately written
//! the slow, obvious way and stays independent of the library's
//! reduced/series implementations.

// Each test binary compiles this module separately and uses a subset;
// the indexed loops mirror the formulas being checked.
#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use qhet::meta::WeightScheme;
use qhet::moments::UnconditionalMoments;
use qhet::sim::CounterRng;

/// E(Q)/W by the definition, Σ q_i(1−q_i) M_{2i}.
pub fn q_mean_direct(m: &UnconditionalMoments, scheme: &WeightScheme) -> f64 {
    let q = scheme.normalized();
    let mut sum = 0.0;
    for i in 0..q.len() {
        sum += q[i] * (1.0 - q[i]) * m.m2[i];
    }
    scheme.total() * sum
}

/// Var(Q) by direct double loops over the index-restricted sums.
pub fn q_variance_direct(m: &UnconditionalMoments, scheme: &WeightScheme) -> f64 {
    let q = scheme.normalized();
    let k = q.len();
    let mut diag = 0.0;
    for i in 0..k {
        let a = q[i] * (1.0 - q[i]);
        diag += a * a * (m.m4[i] - m.m2[i] * m.m2[i]);
    }
    let mut cross = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                cross += q[i] * q[i] * q[j] * q[j] * m.m2[i] * m.m2[j];
            }
        }
    }
    let w = scheme.total();
    w * w * (diag + 2.0 * cross)
}

/// E(Q³) by direct loops over all eight summation groups, O(K³).
pub fn q_third_raw_direct(m: &UnconditionalMoments, scheme: &WeightScheme) -> f64 {
    let q = scheme.normalized();
    let k = q.len();
    let a = |i: usize| q[i] * (1.0 - q[i]);

    let mut t1 = 0.0;
    for i in 0..k {
        t1 += a(i).powi(3) * (m.m6[i] - 3.0 * m.m4[i] * m.m2[i] + 2.0 * m.m2[i].powi(3));
    }
    let mut s_am2 = 0.0;
    let mut s_a2var = 0.0;
    for i in 0..k {
        s_am2 += a(i) * m.m2[i];
        s_a2var += a(i) * a(i) * (m.m4[i] - m.m2[i] * m.m2[i]);
    }
    let t2 = 3.0 * s_am2 * s_a2var;
    let t3 = s_am2.powi(3);

    let mut t4 = 0.0;
    let mut t5 = 0.0;
    let mut t7 = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            t4 += q[i] * q[i] * (1.0 - q[i]) * q[j] * q[j] * (1.0 - q[j]) * m.m3[i] * m.m3[j];
            t5 += q[i].powi(3) * (1.0 - q[i]) * q[j] * q[j] * m.m4[i] * m.m2[j];
            t7 += q[i].powi(3) * q[j].powi(3) * m.m3[i] * m.m3[j];
        }
    }
    let mut t6 = 0.0;
    let mut t8 = 0.0;
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                if i == j || j == l || i == l {
                    continue;
                }
                t6 += q[i] * (1.0 - q[i]) * q[j] * q[j] * q[l] * q[l] * m.m2[i] * m.m2[j] * m.m2[l];
                t8 += q[i] * q[i] * q[j] * q[j] * q[l] * q[l] * m.m2[i] * m.m2[j] * m.m2[l];
            }
        }
    }

    let w = scheme.total();
    w * w * w * (t1 + t2 + t3 - 6.0 * t4 + 12.0 * t5 + 6.0 * t6 - 4.0 * t7 - 8.0 * t8)
}

/// Monte Carlo sample of Q under the known-variance mean-difference model:
/// Θ_i ~ N(0, v²_i + τ²) independent, Q from the statistic definition.
pub fn sample_q(
    rng: &mut CounterRng,
    cond_vars: &[f64],
    tau2: f64,
    scheme: &WeightScheme,
    draws: usize,
) -> Vec<f64> {
    let sd: Vec<f64> = cond_vars.iter().map(|&v| (v + tau2).sqrt()).collect();
    let mut out = Vec::with_capacity(draws);
    let mut effects = vec![0.0; cond_vars.len()];
    for _ in 0..draws {
        for (e, s) in effects.iter_mut().zip(&sd) {
            *e = s * rng.standard_normal();
        }
        out.push(qhet::meta::q_statistic(&effects, scheme).unwrap());
    }
    out
}

/// Mean, and the standard error of the mean, of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance with the standard error of the variance estimate,
/// se² ≈ (μ₄ − σ⁴)/n.
pub fn variance_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2).max(0.0) / n).sqrt())
}

/// A deterministic pseudo-random weight/variance instance for oracle runs.
pub fn random_instance(rng: &mut CounterRng, k: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let weights: Vec<f64> = (0..k).map(|_| 0.2 + 4.0 * rng.uniform()).collect();
    let cond_vars: Vec<f64> = (0..k).map(|_| 0.2 + 2.5 * rng.uniform()).collect();
    let tau2 = if rng.uniform() < 0.3 { 0.0 } else { rng.uniform() };
    (weights, cond_vars, tau2)
}
