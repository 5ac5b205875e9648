//! Independent oracles for the integration suites. Everything here is written
//! directly from the closed-form definitions or as brute-force searches, so
//! the checks stay independent of the library's computation paths.

#![allow(dead_code)]

use bandit_attack_lab::harness::{EpisodeConfig, RoundRecord};

/// Direct evaluation of the attacker's confidence width
/// `sqrt((2 sigma^2 / N) ln(pi^2 K N^2 / (3 delta)))`.
pub fn beta_width_oracle(count: u64, num_arms: usize, sigma: f64, delta: f64) -> f64 {
    let n = count as f64;
    ((2.0 * sigma * sigma / n)
        * (std::f64::consts::PI.powi(2) * num_arms as f64 * n * n / (3.0 * delta)).ln())
    .sqrt()
}

/// Smallest nonnegative perturbation satisfying the attacker's post-attack
/// mean condition, found by bracketing and bisection over the raw condition
/// predicate. Never consults the closed form under test.
pub fn minimal_alpha_oracle(
    pre_sum_with_current: f64,
    cum_attack: f64,
    count_with_current: u64,
    goal: f64,
) -> f64 {
    let n = count_with_current as f64;
    let satisfied = |alpha: f64| (pre_sum_with_current - cum_attack - alpha) / n <= goal;
    if satisfied(0.0) {
        return 0.0;
    }
    let mut hi = 1.0f64;
    while !satisfied(hi) {
        hi *= 2.0;
        assert!(hi.is_finite(), "oracle bracket ran away");
    }
    let mut lo = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if satisfied(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Outcome of replaying one episode through the minimality oracle.
pub struct MinimalityReport {
    pub attacked_rounds: u64,
    pub max_alpha_error: f64,
    pub max_equality_error: f64,
}

/// Replays a log round by round and, for every attacked round, checks the
/// recorded perturbation against [`minimal_alpha_oracle`] and the
/// equality-at-attack property.
pub fn check_attack_minimality(rounds: &[RoundRecord], cfg: &EpisodeConfig) -> MinimalityReport {
    let k = cfg.instance.num_arms();
    let target = cfg.instance.target_arm();
    let mut pre_sums = vec![0.0f64; k];
    let mut cum = vec![0.0f64; k];
    let mut counts = vec![0u64; k];
    let mut report = MinimalityReport {
        attacked_rounds: 0,
        max_alpha_error: 0.0,
        max_equality_error: 0.0,
    };
    for rec in rounds {
        let arm = rec.arm;
        if rec.alpha > 0.0 {
            assert_ne!(arm, target, "target rounds must never be attacked");
            let goal = pre_sums[target] / counts[target] as f64
                - 2.0 * beta_width_oracle(counts[target], k, cfg.instance.sigma(), cfg.delta)
                - cfg.delta0;
            let n_incl = counts[arm] + 1;
            let pre_incl = pre_sums[arm] + rec.pre_reward;
            let oracle = minimal_alpha_oracle(pre_incl, cum[arm], n_incl, goal);
            report.attacked_rounds += 1;
            report.max_alpha_error = report.max_alpha_error.max((oracle - rec.alpha).abs());
            let post_mean = (pre_incl - cum[arm] - rec.alpha) / n_incl as f64;
            let eq_err = (post_mean - goal).abs() / post_mean.abs().max(1.0);
            report.max_equality_error = report.max_equality_error.max(eq_err);
        }
        pre_sums[arm] += rec.pre_reward;
        cum[arm] += rec.alpha;
        counts[arm] += 1;
    }
    report
}

/// First round at which the guaranteed-stop criterion holds, by plain linear
/// scan from 1 upward; `None` if not reached within 1e6 rounds.
pub fn scan_stop_round(num_arms: usize, sigma: f64, delta0: f64, beta: f64) -> Option<u64> {
    let ratio = ((2.0 + beta) / beta).powi(2);
    let k1 = num_arms as f64 - 1.0;
    let rhs = 2.0 * (ratio + 1.0) * k1;
    (1..=1_000_000u64).find(|&t| {
        let t_f = t as f64;
        t_f - (ratio + 1.0) * k1 * (9.0 * sigma * sigma * t_f.ln() / (delta0 * delta0)) >= rhs
    })
}
