//! UCB-style samplers and the count-ratio stopping rule.
//!
//! Two variants share one state type: the regret-oriented sampler with the
//! `3 sigma sqrt(ln t / N_i)` bonus, and the best-arm-identification sampler
//! whose bonus is inflated by `(1 + beta)` and whose stopping rule fires when
//! one arm's pull count dominates all others' combined by the ratio
//! `((2 + beta) / beta)^2`.
//!
//! Learners read only post-attack data: pull counts and observed reward sums.
//! State is single-owner per episode; selectors are pure functions of state.

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};

/// Which sampler the learner runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerVariant {
    UcbRegret,
    UcbBai,
}

#[derive(Debug, Clone, Copy)]
struct BaiParams {
    beta: f64,
    stop_ratio: f64,
}

/// Learner-side state: round counter, per-arm pull counts, and per-arm sums
/// of observed (post-attack) rewards.
#[derive(Debug, Clone)]
pub struct LearnerState {
    t: u64,
    counts: Vec<u64>,
    post_sums: Vec<f64>,
    sigma: f64,
    variant: LearnerVariant,
    bai: Option<BaiParams>,
}

/// Outcome of the stopping-rule check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopDecision {
    pub stopped: bool,
    /// Present iff stopped; the arm with the dominating pull count.
    pub winner: Option<usize>,
}

impl StopDecision {
    fn not_stopped() -> Self {
        Self {
            stopped: false,
            winner: None,
        }
    }
}

impl LearnerState {
    /// Regret-minimizing UCB learner.
    pub fn ucb_regret(num_arms: usize, sigma: f64) -> Result<Self> {
        Self::build(num_arms, sigma, LearnerVariant::UcbRegret, None)
    }

    /// Best-arm-identification learner; the stop ratio is derived from `beta`.
    pub fn ucb_bai(num_arms: usize, sigma: f64, beta: f64) -> Result<Self> {
        let stop_ratio = bounds::stop_ratio(beta)?;
        Self::build(
            num_arms,
            sigma,
            LearnerVariant::UcbBai,
            Some(BaiParams { beta, stop_ratio }),
        )
    }

    /// Best-arm-identification learner with an explicit stop ratio. This
    /// breaks the derived relation between bonus and stopping rule; it exists
    /// for sensitivity experiments only.
    pub fn ucb_bai_with_ratio(
        num_arms: usize,
        sigma: f64,
        beta: f64,
        stop_ratio: f64,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        if !(stop_ratio.is_finite() && stop_ratio > 0.0) {
            return Err(Error::Config(format!(
                "stop ratio must be positive, got {stop_ratio}"
            )));
        }
        Self::build(
            num_arms,
            sigma,
            LearnerVariant::UcbBai,
            Some(BaiParams { beta, stop_ratio }),
        )
    }

    fn build(
        num_arms: usize,
        sigma: f64,
        variant: LearnerVariant,
        bai: Option<BaiParams>,
    ) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::Config(format!(
                "learner needs at least 2 arms, got {num_arms}"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            t: 0,
            counts: vec![0; num_arms],
            post_sums: vec![0.0; num_arms],
            sigma,
            variant,
            bai,
        })
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn variant(&self) -> LearnerVariant {
        self.variant
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn post_sums(&self) -> &[f64] {
        &self.post_sums
    }

    /// Post-attack empirical mean of `arm`, if it has been pulled.
    pub fn post_mean(&self, arm: usize) -> Option<f64> {
        (self.counts[arm] > 0).then(|| self.post_sums[arm] / self.counts[arm] as f64)
    }

    /// Effective stopping ratio (best-arm-identification variant only).
    pub fn stop_ratio(&self) -> Option<f64> {
        self.bai.map(|p| p.stop_ratio)
    }

    /// Arm to pull in the next round, dispatching on the variant.
    pub fn select(&self) -> usize {
        match self.variant {
            LearnerVariant::UcbRegret => self.ucb_select(),
            LearnerVariant::UcbBai => self.bai_select(),
        }
    }

    /// Regret-UCB selection: round-robin through the arms once, then
    /// `argmax mu_hat_i + 3 sigma sqrt(ln(t+1) / N_i)`, ties to the lowest
    /// index. `t + 1` is the (1-based) round being decided.
    pub fn ucb_select(&self) -> usize {
        debug_assert_eq!(self.variant, LearnerVariant::UcbRegret);
        let k = self.counts.len() as u64;
        if self.t < k {
            return self.t as usize;
        }
        let ln_round = ((self.t + 1) as f64).ln();
        self.argmax_index(|mean, count| mean + 3.0 * self.sigma * (ln_round / count).sqrt())
    }

    /// Best-arm-identification selection: round-robin initialization, then
    /// `argmax mu_hat_i + (1 + beta) * radius`, ties to the lowest index.
    pub fn bai_select(&self) -> usize {
        debug_assert_eq!(self.variant, LearnerVariant::UcbBai);
        let k = self.counts.len() as u64;
        if self.t < k {
            return self.t as usize;
        }
        let p = self.bai.expect("bai params present for the bai variant");
        self.argmax_index(|mean, count| {
            let radius = confidence_radius(count as u64, self.t + 1, p.stop_ratio, self.sigma)
                .expect("t + 1 >= 2 once every arm is initialized");
            mean + (1.0 + p.beta) * radius
        })
    }

    fn argmax_index(&self, index_fn: impl Fn(f64, f64) -> f64) -> usize {
        debug_assert!(self.counts.iter().all(|&n| n > 0));
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, (&n, &sum)) in self.counts.iter().zip(&self.post_sums).enumerate() {
            let count = n as f64;
            let score = index_fn(sum / count, count);
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    /// Stopping rule: fires when some arm's pull count is at least
    /// `stop_ratio` times the combined pulls of all other arms; the winner is
    /// the arm with the largest count. For ratios above 1, at most one arm
    /// can satisfy the condition.
    pub fn bai_stop_check(&self) -> StopDecision {
        debug_assert_eq!(self.variant, LearnerVariant::UcbBai);
        debug_assert!(self.t >= self.counts.len() as u64, "all arms initialized");
        let ratio = self
            .bai
            .expect("bai params present for the bai variant")
            .stop_ratio;
        let total = self.t;
        debug_assert_eq!(total, self.counts.iter().sum::<u64>());
        let mut satisfying = 0usize;
        let mut winner: Option<usize> = None;
        for (i, &n) in self.counts.iter().enumerate() {
            let rest = (total - n) as f64;
            if n as f64 >= ratio * rest {
                satisfying += 1;
                winner = match winner {
                    Some(w) if self.counts[w] >= n => Some(w),
                    _ => Some(i),
                };
            }
        }
        if ratio > 1.0 {
            debug_assert!(satisfying <= 1, "ratio > 1 admits at most one winner");
        }
        match winner {
            Some(w) => StopDecision {
                stopped: true,
                winner: Some(w),
            },
            None => StopDecision::not_stopped(),
        }
    }

    /// Records the observed (post-attack) reward for the arm pulled this round.
    pub fn observe(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.post_sums[arm] += reward;
        self.t += 1;
    }
}

/// High-probability confidence radius `sigma * sqrt(2 * alpha * ln t / count)`
/// for an arm pulled `count` times by round `t`, with exponent `alpha`.
///
/// Strictly decreasing in `count`, increasing in `t`; requires `t >= 2` so the
/// logarithm is positive.
pub fn confidence_radius(count: u64, t: u64, stop_ratio_exponent: f64, sigma: f64) -> Result<f64> {
    if count == 0 {
        return Err(Error::Contract(
            "confidence radius needs at least one pull".into(),
        ));
    }
    if t < 2 {
        return Err(Error::Contract(format!(
            "confidence radius needs t >= 2, got {t}"
        )));
    }
    debug_assert!(stop_ratio_exponent > 0.0 && sigma > 0.0);
    Ok(sigma * (2.0 * stop_ratio_exponent * (t as f64).ln() / count as f64).sqrt())
}
