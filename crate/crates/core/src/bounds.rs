//! Closed-form guarantees for the attacked learner, evaluated numerically:
//! the cap on any non-target arm's pulls, the induced floor on target pulls,
//! the ceiling on cumulative attack cost, the stopping-ratio constant, the
//! margin threshold that makes the stop criterion monotone, and an integer
//! solver for the earliest round at which the stop criterion is guaranteed.
//!
//! Every function here is a deterministic pure function of its inputs; `log`
//! is the natural logarithm throughout. Values are returned as reals; callers
//! compare against integer counts directly without intermediate rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Gaps;

/// Ratio by which one arm's pulls must dominate all others' combined for the
/// stopping rule to fire: `((2 + beta) / beta)^2`. Always > 1, approaching 1
/// as `beta` grows.
pub fn stop_ratio(bai_beta: f64) -> Result<f64> {
    if !(bai_beta.is_finite() && bai_beta > 0.0) {
        return Err(Error::Config(format!(
            "beta must be positive, got {bai_beta}"
        )));
    }
    Ok(((2.0 + bai_beta) / bai_beta).powi(2))
}

/// Parameters every bound depends on. `stop_ratio` is derived from `bai_beta`
/// and cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    num_arms: usize,
    sigma: f64,
    delta0: f64,
    delta: f64,
    bai_beta: f64,
    stop_ratio: f64,
    gaps: Gaps,
}

impl BoundConfig {
    pub fn new(
        num_arms: usize,
        sigma: f64,
        delta0: f64,
        delta: f64,
        bai_beta: f64,
        gaps: Gaps,
    ) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::Config(format!(
                "bounds need at least 2 arms, got {num_arms}"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if !(delta0.is_finite() && delta0 > 0.0) {
            return Err(Error::UndefinedBound(format!(
                "bounds divide by the attack margin; delta0 must be positive, got {delta0}"
            )));
        }
        if !(delta.is_finite() && delta > 0.0 && delta <= 0.5) {
            return Err(Error::Config(format!(
                "confidence parameter delta must lie in (0, 1/2], got {delta}"
            )));
        }
        if gaps.len() != num_arms {
            return Err(Error::Config(format!(
                "expected {num_arms} gaps, got {}",
                gaps.len()
            )));
        }
        let stop_ratio = stop_ratio(bai_beta)?;
        debug_assert!(stop_ratio > 1.0);
        Ok(Self {
            num_arms,
            sigma,
            delta0,
            delta,
            bai_beta,
            stop_ratio,
            gaps,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn bai_beta(&self) -> f64 {
        self.bai_beta
    }

    pub fn stop_ratio(&self) -> f64 {
        self.stop_ratio
    }

    fn check_horizon(&self, horizon: u64) -> Result<f64> {
        if horizon < 2 * self.num_arms as u64 {
            return Err(Error::Contract(format!(
                "horizon {horizon} below 2K = {}",
                2 * self.num_arms
            )));
        }
        Ok(horizon as f64)
    }

    /// High-probability cap on any single non-target arm's pulls over
    /// `horizon` rounds: `2 + (9 sigma^2 / delta0^2) * ln(horizon)`.
    ///
    /// The companion cap `N_target(t)` is applied by the harness checks,
    /// which know the realized counts.
    pub fn nontarget_pull_cap(&self, horizon: u64) -> Result<f64> {
        let t = self.check_horizon(horizon)?;
        Ok(2.0 + 9.0 * self.sigma * self.sigma / (self.delta0 * self.delta0) * t.ln())
    }

    /// Guaranteed number of target-arm pulls over `horizon` rounds:
    /// `horizon - (K - 1) * nontarget_pull_cap`.
    pub fn target_pull_floor(&self, horizon: u64) -> Result<f64> {
        let cap = self.nontarget_pull_cap(horizon)?;
        Ok(horizon as f64 - (self.num_arms as f64 - 1.0) * cap)
    }

    /// High-probability ceiling on the cumulative attack cost over `horizon`
    /// rounds, with `c` the non-target pull cap:
    ///
    /// `c * sum_{i != target}(gap_i + delta0)
    ///  + sigma (K - 1) sqrt(32 c ln(pi^2 K c^2 / (3 delta)))`
    pub fn attack_cost_ceiling(&self, horizon: u64) -> Result<f64> {
        let cap = self.nontarget_pull_cap(horizon)?;
        let target = self.num_arms - 1;
        let gap_term: f64 = self
            .gaps
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target)
            .map(|(_, g)| g + self.delta0)
            .sum();
        let k = self.num_arms as f64;
        let log_arg = std::f64::consts::PI.powi(2) * k * cap * cap / (3.0 * self.delta);
        Ok(cap * gap_term + self.sigma * (k - 1.0) * (32.0 * cap * log_arg.ln()).sqrt())
    }

    /// Smallest margin that makes the stop-criterion margin function strictly
    /// increasing: `3 sigma sqrt((K - 1) (1 + stop_ratio))`. The stop-round
    /// solver requires `delta0` strictly above this.
    pub fn delta0_threshold(&self) -> f64 {
        3.0 * self.sigma * ((self.num_arms as f64 - 1.0) * (1.0 + self.stop_ratio)).sqrt()
    }

    /// Left-hand side of the guaranteed-stop criterion at round `t`:
    /// `t - (stop_ratio + 1)(K - 1) * 9 sigma^2 ln(t) / delta0^2`.
    pub fn stop_criterion_lhs(&self, t: u64) -> Result<f64> {
        if t < 1 {
            return Err(Error::Contract("round must be at least 1".into()));
        }
        let t = t as f64;
        let coeff = (self.stop_ratio + 1.0) * (self.num_arms as f64 - 1.0);
        Ok(t - coeff * 9.0 * self.sigma * self.sigma * t.ln() / (self.delta0 * self.delta0))
    }

    /// Right-hand side of the guaranteed-stop criterion:
    /// `2 (stop_ratio + 1)(K - 1)`.
    pub fn stop_criterion_rhs(&self) -> f64 {
        2.0 * (self.stop_ratio + 1.0) * (self.num_arms as f64 - 1.0)
    }

    /// Smallest round `t*` at which the stop criterion is guaranteed:
    /// the first integer `t` with `stop_criterion_lhs(t) >= stop_criterion_rhs`,
    /// found by exponential doubling followed by integer bisection.
    ///
    /// Refuses when `delta0` is not strictly above [`Self::delta0_threshold`],
    /// since monotonicity of the left-hand side is then not guaranteed.
    pub fn sample_complexity_round(&self) -> Result<u64> {
        let threshold = self.delta0_threshold();
        if self.delta0 <= threshold {
            return Err(Error::Refused(format!(
                "margin delta0 = {} must exceed the monotonicity threshold \
                 3*sigma*sqrt((K-1)*(1+stop_ratio)) = {threshold} for the \
                 stop-round solver to apply",
                self.delta0
            )));
        }
        let rhs = self.stop_criterion_rhs();
        // The left-hand side is strictly increasing and unbounded, so
        // doubling terminates.
        let mut hi = 1u64;
        while self.stop_criterion_lhs(hi)? < rhs {
            hi = hi.checked_mul(2).ok_or_else(|| {
                Error::Contract("stop-round search overflowed u64".into())
            })?;
        }
        let mut lo = hi / 2; // lhs(lo) < rhs, or lo == 0 when hi == 1
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.stop_criterion_lhs(mid)? >= rhs {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        debug_assert!(self.stop_criterion_lhs(hi)? >= rhs);
        debug_assert!(hi == 1 || self.stop_criterion_lhs(hi - 1)? < rhs);
        Ok(hi)
    }

    /// Dominant-order cost estimate for display next to the exact ceiling:
    /// `sum_{i != target} gap_i * ln(horizon) + sigma K ln(horizon)`.
    /// Informational only; never asserted against.
    pub fn cost_order_estimate(&self, horizon: u64) -> f64 {
        let ln_t = (horizon as f64).ln();
        let gap_sum: f64 = self.gaps.values().iter().sum(); // target gap is zero
        gap_sum * ln_t + self.sigma * self.num_arms as f64 * ln_t
    }

    /// Evaluates every bound at `horizon` into one report.
    pub fn report(&self, horizon: u64) -> Result<BoundReport> {
        let sample_complexity_round = match self.sample_complexity_round() {
            Ok(t) => Some(t),
            Err(Error::Refused(_)) => None,
            Err(e) => return Err(e),
        };
        let stop_criterion_values = match sample_complexity_round {
            Some(t_star) => Some(vec![
                (1, self.stop_criterion_lhs(1)?),
                (t_star - 1, self.stop_criterion_lhs(t_star - 1)?),
                (t_star, self.stop_criterion_lhs(t_star)?),
            ]),
            None => None,
        };
        Ok(BoundReport {
            horizon,
            stop_ratio: self.stop_ratio,
            delta0_threshold: self.delta0_threshold(),
            nontarget_pull_cap: self.nontarget_pull_cap(horizon)?,
            target_pull_floor: self.target_pull_floor(horizon)?,
            attack_cost_ceiling: self.attack_cost_ceiling(horizon)?,
            cost_order_estimate: self.cost_order_estimate(horizon),
            sample_complexity_round,
            stop_criterion_rhs: self.stop_criterion_rhs(),
            stop_criterion_values,
        })
    }
}

/// Every analytic bound evaluated for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundReport {
    pub horizon: u64,
    pub stop_ratio: f64,
    pub delta0_threshold: f64,
    pub nontarget_pull_cap: f64,
    pub target_pull_floor: f64,
    pub attack_cost_ceiling: f64,
    pub cost_order_estimate: f64,
    /// `None` when the margin is below the monotonicity threshold.
    pub sample_complexity_round: Option<u64>,
    pub stop_criterion_rhs: f64,
    /// Margin-function samples bracketing the guaranteed stop round.
    pub stop_criterion_values: Option<Vec<(u64, f64)>>,
}
