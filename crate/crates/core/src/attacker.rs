//! Oracle reward-poisoning attacker.
//!
//! Whenever the learner pulls a non-target arm after the initialization
//! rounds, the attacker subtracts the smallest nonnegative perturbation that
//! drags that arm's post-attack empirical mean to at least `2 * beta_width`
//! plus the margin `delta0` below the target arm's current empirical mean.
//! The perturbation has a closed form; no line search is needed at runtime.
//!
//! The attacker sees the pre-attack reward of the current round and its own
//! history, never the true means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// High-probability confidence width `beta(N)` used by the attacker to cover
/// estimation error in empirical means:
///
/// `sqrt((2 sigma^2 / N) * ln(pi^2 * K * N^2 / (3 delta)))`
///
/// Strictly decreasing in `N` for `K >= 2` and `delta <= 1/2`.
pub fn beta_width(count: u64, num_arms: usize, sigma: f64, delta: f64) -> Result<f64> {
    if count == 0 {
        return Err(Error::Contract(
            "beta width needs at least one pull".into(),
        ));
    }
    if num_arms < 2 {
        return Err(Error::Config(format!(
            "beta width needs at least 2 arms, got {num_arms}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    check_delta(delta)?;
    let n = count as f64;
    let log_arg = std::f64::consts::PI.powi(2) * num_arms as f64 * n * n / (3.0 * delta);
    Ok((2.0 * sigma * sigma / n * log_arg.ln()).sqrt())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0 && delta <= 0.5) {
        return Err(Error::Config(format!(
            "confidence parameter delta must lie in (0, 1/2], got {delta}"
        )));
    }
    Ok(())
}

/// Result of one attack computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    /// Perturbation subtracted from the pre-attack reward; always >= 0.
    pub alpha: f64,
    /// True iff `alpha > 0`.
    pub attacked: bool,
}

impl AttackOutcome {
    fn none() -> Self {
        Self {
            alpha: 0.0,
            attacked: false,
        }
    }
}

/// Attacker-side bookkeeping: per-arm pre-attack reward sums, cumulative
/// injected perturbations, and pull counts, plus the attack parameters.
///
/// Invariants maintained by `record_round`:
/// - `post_sums[i] == pre_sums[i] - cum_attack[i]` (post sums are accumulated
///   with the learner's own update order, so the equality is bit-exact),
/// - `cum_attack[target] == 0`,
/// - every `cum_attack[i] >= 0`.
#[derive(Debug, Clone)]
pub struct AttackerState {
    pre_sums: Vec<f64>,
    post_sums: Vec<f64>,
    cum_attack: Vec<f64>,
    counts: Vec<u64>,
    delta0: f64,
    delta: f64,
    sigma: f64,
    num_arms: usize,
    target: usize,
}

impl AttackerState {
    pub fn new(
        num_arms: usize,
        target: usize,
        sigma: f64,
        delta0: f64,
        delta: f64,
    ) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::Config(format!(
                "attacker needs at least 2 arms, got {num_arms}"
            )));
        }
        if target >= num_arms {
            return Err(Error::Config(format!(
                "target arm {target} out of range for {num_arms} arms"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if !(delta0.is_finite() && delta0 >= 0.0) {
            return Err(Error::Config(format!(
                "margin delta0 must be nonnegative, got {delta0}"
            )));
        }
        check_delta(delta)?;
        Ok(Self {
            pre_sums: vec![0.0; num_arms],
            post_sums: vec![0.0; num_arms],
            cum_attack: vec![0.0; num_arms],
            counts: vec![0; num_arms],
            delta0,
            delta,
            sigma,
            num_arms,
            target,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn pre_sums(&self) -> &[f64] {
        &self.pre_sums
    }

    pub fn post_sums(&self) -> &[f64] {
        &self.post_sums
    }

    pub fn cum_attack(&self) -> &[f64] {
        &self.cum_attack
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Pre-attack empirical mean of `arm`, if it has been pulled.
    pub fn pre_mean(&self, arm: usize) -> Option<f64> {
        (self.counts[arm] > 0).then(|| self.pre_sums[arm] / self.counts[arm] as f64)
    }

    /// Post-attack empirical mean of `arm`, if it has been pulled.
    pub fn post_mean(&self, arm: usize) -> Option<f64> {
        (self.counts[arm] > 0).then(|| self.post_sums[arm] / self.counts[arm] as f64)
    }

    /// Cumulative attack cost so far.
    pub fn total_cost(&self) -> f64 {
        self.cum_attack.iter().sum()
    }

    /// Perturbation for the current round, given the chosen `arm` and its
    /// pre-attack reward. The state must not yet include this round's pull:
    /// the current pull and reward are folded in here, while the target arm's
    /// statistics are read as of the previous round.
    ///
    /// Target pulls are never attacked. Requires `round` past the
    /// initialization phase and at least one target pull.
    pub fn compute_attack(&self, arm: usize, pre_reward: f64, round: u64) -> Result<AttackOutcome> {
        if arm >= self.num_arms {
            return Err(Error::Contract(format!(
                "arm index {arm} out of range for {} arms",
                self.num_arms
            )));
        }
        if arm == self.target {
            return Ok(AttackOutcome::none());
        }
        if round <= self.num_arms as u64 {
            return Err(Error::Contract(format!(
                "no attack during the first {} rounds, got round {round}",
                self.num_arms
            )));
        }
        if self.counts[self.target] == 0 {
            return Err(Error::Contract(
                "cannot attack before the target arm has been pulled".into(),
            ));
        }
        // Target statistics are post-attack means, but the target is never
        // perturbed, so they coincide with its pre-attack means.
        let target_mean = self.post_sums[self.target] / self.counts[self.target] as f64;
        let width = beta_width(
            self.counts[self.target],
            self.num_arms,
            self.sigma,
            self.delta,
        )?;
        let goal = target_mean - 2.0 * width - self.delta0;
        // Closed form: [ N_i * mu0_i - sum(alpha so far) - N_i * goal ]_+
        // with N_i and mu0_i including the current pull.
        let n_i = (self.counts[arm] + 1) as f64;
        let pre_sum_with_current = self.pre_sums[arm] + pre_reward;
        let alpha = (pre_sum_with_current - self.cum_attack[arm] - n_i * goal).max(0.0);
        Ok(AttackOutcome {
            alpha,
            attacked: alpha > 0.0,
        })
    }

    /// Folds the round into the attacker's books; the learner observes
    /// `pre_reward - alpha`.
    pub fn record_round(&mut self, arm: usize, pre_reward: f64, alpha: f64) {
        debug_assert!(alpha >= 0.0);
        debug_assert!(
            arm != self.target || alpha == 0.0,
            "the target arm is never perturbed"
        );
        self.pre_sums[arm] += pre_reward;
        self.post_sums[arm] += pre_reward - alpha;
        self.cum_attack[arm] += alpha;
        self.counts[arm] += 1;
    }
}
