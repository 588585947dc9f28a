//! Pins the O(K) power-sum reductions of the Q-moment formulas against
//! direct index-restricted loops, and the mean-difference moment ladder
//! against Monte Carlo, on randomized instances.

mod common;

use common::{
    mean_and_se, q_mean_direct, q_third_raw_direct, q_variance_direct, random_instance, sample_q,
};
use qhet::meta::{ModelState, WeightKind, WeightScheme};
use qhet::moments::{
    md_unconditional_moments, q_mean, q_third_raw_moment, q_variance, UnconditionalMoments,
};
use qhet::sim::CounterRng;

fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn reductions_match_direct_loops_on_random_instances() {
    let mut rng = CounterRng::from_key_parts(&[0x5eed, 1]);
    for k in 2..=8usize {
        for trial in 0..40 {
            let (weights, cond_vars, tau2) = random_instance(&mut rng, k);
            let scheme = WeightScheme::new(weights, WeightKind::Custom).unwrap();
            let state = ModelState::new(tau2, cond_vars, 0.0).unwrap();
            let m = md_unconditional_moments(&state);

            let mean_fast = q_mean(&m, &scheme).unwrap();
            let var_fast = q_variance(&m, &scheme).unwrap();
            let third_fast = q_third_raw_moment(&m, &scheme).unwrap();

            assert!(
                close_rel(mean_fast, q_mean_direct(&m, &scheme), 1e-12),
                "mean K={k} trial={trial}"
            );
            assert!(
                close_rel(var_fast, q_variance_direct(&m, &scheme), 1e-12),
                "variance K={k} trial={trial}"
            );
            assert!(
                close_rel(third_fast, q_third_raw_direct(&m, &scheme), 1e-12),
                "third moment K={k} trial={trial}"
            );
        }
    }
}

#[test]
fn reductions_match_direct_loops_with_skewed_m3() {
    // The M3-bearing groups vanish for mean difference, so exercise them
    // with synthetic nonzero third and fifth moments too.
    let mut rng = CounterRng::from_key_parts(&[0x5eed, 2]);
    for k in 2..=6usize {
        for trial in 0..25 {
            let weights: Vec<f64> = (0..k).map(|_| 0.3 + 3.0 * rng.uniform()).collect();
            let m2: Vec<f64> = (0..k).map(|_| 0.5 + 2.0 * rng.uniform()).collect();
            let m3: Vec<f64> = (0..k).map(|_| 2.0 * rng.uniform() - 1.0).collect();
            // Keep the moment inequalities satisfied.
            let m4: Vec<f64> = m2.iter().map(|v| 3.5 * v * v).collect();
            let m5: Vec<f64> = m3.iter().map(|v| 4.0 * v).collect();
            let m6: Vec<f64> = m2
                .iter()
                .zip(&m4)
                .map(|(v2, v4)| 6.0 * v4 * v2)
                .collect();
            let m = UnconditionalMoments::new(m2, m3, m4, m5, m6).unwrap();
            let scheme = WeightScheme::new(weights, WeightKind::Custom).unwrap();

            let third_fast = q_third_raw_moment(&m, &scheme).unwrap();
            let third_direct = q_third_raw_direct(&m, &scheme);
            assert!(
                close_rel(third_fast, third_direct, 1e-12),
                "K={k} trial={trial}: {third_fast} vs {third_direct}"
            );
        }
    }
}

#[test]
fn chi_square_closed_form_from_direct_loops() {
    // Known IV weights, τ² = 0: the brute-force evaluation of the third
    // moment must reproduce the χ²_{K−1} raw moment (K−1)(K+1)(K+3).
    for k in 3..=6usize {
        let cond_vars: Vec<f64> = (0..k).map(|i| 0.5 + 0.25 * i as f64).collect();
        let weights: Vec<f64> = cond_vars.iter().map(|v| 1.0 / v).collect();
        let scheme = WeightScheme::new(weights, WeightKind::Custom).unwrap();
        let state = ModelState::new(0.0, cond_vars, 0.0).unwrap();
        let m = md_unconditional_moments(&state);
        let expected = ((k - 1) * (k + 1) * (k + 3)) as f64;
        let direct = q_third_raw_direct(&m, &scheme);
        assert!(close_rel(direct, expected, 1e-10), "K={k}: {direct} vs {expected}");
    }
}

#[test]
fn md_moment_ladder_matches_monte_carlo() {
    // v² = 2, τ² = 0.5: E X⁴ of N(0, 2.5) is 3·2.5², checked by simulation.
    let mut rng = CounterRng::from_key_parts(&[0x5eed, 3]);
    let draws = 1_000_000usize;
    let sd = 2.5f64.sqrt();
    let mut sum4 = 0.0;
    let mut sum8 = 0.0;
    for _ in 0..draws {
        let x = sd * rng.standard_normal();
        let x4 = x * x * x * x;
        sum4 += x4;
        sum8 += x4 * x4;
    }
    let n = draws as f64;
    let mean4 = sum4 / n;
    let se4 = ((sum8 / n - mean4 * mean4).max(0.0) / n).sqrt();
    let expected = 18.75; // 3·4 + 6·2·0.5 + 3·0.25
    assert!(
        (mean4 - expected).abs() <= 3.0 * se4,
        "E X⁴ = {mean4} vs {expected} (se {se4})"
    );
}

#[test]
fn q_mean_hand_value_cross_checked_by_monte_carlo() {
    // K = 3, w = (1, 2, 3), M2 = (1, 1, 2) -> E(Q) = 31/6.
    let scheme = WeightScheme::new(vec![1.0, 2.0, 3.0], WeightKind::Custom).unwrap();
    let cond_vars = vec![1.0, 1.0, 2.0];
    let mut rng = CounterRng::from_key_parts(&[0x5eed, 4]);
    let sample = sample_q(&mut rng, &cond_vars, 0.0, &scheme, 400_000);
    let (mean, se) = mean_and_se(&sample);
    assert!((mean - 31.0 / 6.0).abs() <= 3.0 * se, "MC mean {mean} (se {se})");
}

#[test]
fn k2_variance_resolves_to_two_by_monte_carlo() {
    // The single-pair case w = (1,1), v² = 1, τ² = 0: the formula gives
    // Var(Q) = 2 and the Monte Carlo oracle must agree.
    let scheme = WeightScheme::new(vec![1.0, 1.0], WeightKind::Custom).unwrap();
    let state = ModelState::new(0.0, vec![1.0, 1.0], 0.0).unwrap();
    let m = md_unconditional_moments(&state);
    let formula = q_variance(&m, &scheme).unwrap();
    assert!((formula - 2.0).abs() < 1e-12);

    let mut rng = CounterRng::from_key_parts(&[0x5eed, 5]);
    let sample = sample_q(&mut rng, &state.cond_vars, 0.0, &scheme, 1_000_000);
    let (var, se) = common::variance_and_se(&sample);
    assert!((var - formula).abs() <= 3.0 * se, "MC var {var} vs {formula} (se {se})");
}
