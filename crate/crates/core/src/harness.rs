//! Seeded episodes coupling environment, learner, and attacker, plus Monte
//! Carlo campaigns that compare empirical outcomes against the analytic
//! bounds.
//!
//! Per round the order is fixed: the learner selects, the environment samples
//! the pre-attack reward, the attacker folds the pull into its books and
//! computes the perturbation, and the learner observes the perturbed reward.
//! Episodes are deterministic given their seed; campaigns derive per-trial
//! seeds from the campaign seed via SplitMix64 and run trials in parallel
//! with no shared mutable state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacker::{beta_width, AttackerState};
use crate::bounds::{BoundConfig, BoundReport};
use crate::error::{Error, Result};
use crate::learner::{LearnerState, LearnerVariant};
use crate::model::{BanditInstance, RngSeed};

fn default_true() -> bool {
    true
}

fn default_delta0() -> f64 {
    0.2
}

fn default_delta() -> f64 {
    0.05
}

fn default_bai_beta() -> f64 {
    2.0
}

/// Fallback round cap for best-arm-identification episodes when no horizon is
/// given and the guaranteed stop round cannot be computed.
pub const FALLBACK_MAX_ROUNDS: u64 = 1_000_000;

/// Full description of one episode: environment, victim, attack parameters,
/// horizon, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub instance: BanditInstance,
    pub victim: LearnerVariant,
    #[serde(default = "default_true")]
    pub attack_enabled: bool,
    /// Attacker margin; how far below the target's deflated mean attacked
    /// arms are pushed.
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    /// Confidence parameter shared by the attacker width and the bounds.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Bonus-inflation parameter of the best-arm-identification learner.
    #[serde(default = "default_bai_beta")]
    pub bai_beta: f64,
    /// Expert override decoupling the stopping ratio from `bai_beta`.
    #[serde(default)]
    pub stop_ratio_override: Option<f64>,
    /// Round budget: the exact horizon for the regret victim, a cap for the
    /// best-arm-identification victim. When absent for the latter, defaults
    /// to four times the guaranteed stop round, or 1e6 if that is not
    /// computable.
    #[serde(default)]
    pub horizon: Option<u64>,
    /// Expert switch: run the best-arm-identification sampler without its
    /// stopping rule, e.g. to inspect counts at a fixed round.
    #[serde(default = "default_true")]
    pub bai_stop_enabled: bool,
    #[serde(default)]
    pub seed: RngSeed,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::Config(format!(
                "confidence parameter delta must lie in (0, 1/2], got {}",
                self.delta
            )));
        }
        if !(self.delta0.is_finite() && self.delta0 >= 0.0) {
            return Err(Error::Config(format!(
                "margin delta0 must be nonnegative, got {}",
                self.delta0
            )));
        }
        if !(self.bai_beta.is_finite() && self.bai_beta > 0.0) {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.bai_beta
            )));
        }
        if let Some(r) = self.stop_ratio_override {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!(
                    "stop ratio override must be positive, got {r}"
                )));
            }
        }
        match self.victim {
            LearnerVariant::UcbRegret => {
                let horizon = self.horizon.ok_or_else(|| {
                    Error::Config("the regret victim needs an explicit horizon".into())
                })?;
                if self.attack_enabled && horizon < 2 * self.instance.num_arms() as u64 {
                    return Err(Error::Config(format!(
                        "attacked regret runs need horizon >= 2K = {}, got {horizon}",
                        2 * self.instance.num_arms()
                    )));
                }
            }
            LearnerVariant::UcbBai => {
                if let Some(h) = self.horizon {
                    if h < self.instance.num_arms() as u64 {
                        return Err(Error::Config(format!(
                            "round cap {h} cannot cover the {} initialization rounds",
                            self.instance.num_arms()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Bound parameters implied by this episode configuration.
    pub fn bound_config(&self) -> Result<BoundConfig> {
        BoundConfig::new(
            self.instance.num_arms(),
            self.instance.sigma(),
            self.delta0,
            self.delta,
            self.bai_beta,
            self.instance.gaps(),
        )
    }

    /// Concrete round budget, applying the default rule for the
    /// best-arm-identification victim.
    pub fn resolved_horizon(&self) -> Result<u64> {
        if let Some(h) = self.horizon {
            return Ok(h);
        }
        match self.victim {
            LearnerVariant::UcbRegret => Err(Error::Config(
                "the regret victim needs an explicit horizon".into(),
            )),
            LearnerVariant::UcbBai => Ok(self
                .bound_config()
                .and_then(|b| b.sample_complexity_round())
                .map(|t_star| 4 * t_star)
                .unwrap_or(FALLBACK_MAX_ROUNDS)),
        }
    }

    /// Copy of the configuration with the horizon made explicit, for echoing
    /// into output artifacts.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        out.horizon = Some(self.resolved_horizon()?);
        Ok(out)
    }

    fn build_learner(&self) -> Result<LearnerState> {
        let k = self.instance.num_arms();
        let sigma = self.instance.sigma();
        match self.victim {
            LearnerVariant::UcbRegret => LearnerState::ucb_regret(k, sigma),
            LearnerVariant::UcbBai => match self.stop_ratio_override {
                Some(r) => LearnerState::ucb_bai_with_ratio(k, sigma, self.bai_beta, r),
                None => LearnerState::ucb_bai(k, sigma, self.bai_beta),
            },
        }
    }
}

/// One simulated round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    /// 1-based round number.
    pub t: u64,
    pub arm: usize,
    pub pre_reward: f64,
    pub alpha: f64,
    /// Always `pre_reward - alpha`.
    pub post_reward: f64,
}

/// Terminal state of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSnapshot {
    pub rounds_run: u64,
    pub counts: Vec<u64>,
    pub pre_means: Vec<Option<f64>>,
    pub post_means: Vec<Option<f64>>,
    pub cum_attack: Vec<f64>,
    pub total_cost: f64,
    /// Round at which the stopping rule fired, if it did.
    pub stop_round: Option<u64>,
    /// Arm declared best at the stop round.
    pub winner: Option<usize>,
}

/// Complete, replayable record of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub rounds: Vec<RoundRecord>,
    pub snapshot: EpisodeSnapshot,
}

/// Receives rounds as they are produced, so long episodes can stream to disk
/// instead of accumulating in memory.
pub trait RoundSink {
    fn record(&mut self, rec: &RoundRecord) -> Result<()>;
}

impl RoundSink for Vec<RoundRecord> {
    fn record(&mut self, rec: &RoundRecord) -> Result<()> {
        self.push(*rec);
        Ok(())
    }
}

/// Runs one episode, emitting every round into `sink`.
pub fn run_episode_with(cfg: &EpisodeConfig, sink: &mut dyn RoundSink) -> Result<EpisodeSnapshot> {
    cfg.validate()?;
    let horizon = cfg.resolved_horizon()?;
    let k = cfg.instance.num_arms() as u64;
    let target = cfg.instance.target_arm();
    let mut learner = cfg.build_learner()?;
    let mut attacker = AttackerState::new(
        cfg.instance.num_arms(),
        target,
        cfg.instance.sigma(),
        cfg.delta0,
        cfg.delta,
    )?;
    let mut rng = cfg.seed.rng();

    let mut stop_round = None;
    let mut winner = None;
    for t in 1..=horizon {
        let arm = learner.select();
        let pre_reward = cfg.instance.sample_reward(arm, &mut rng)?;
        let alpha = if cfg.attack_enabled && t > k {
            attacker.compute_attack(arm, pre_reward, t)?.alpha
        } else {
            0.0
        };
        attacker.record_round(arm, pre_reward, alpha);
        let post_reward = pre_reward - alpha;
        learner.observe(arm, post_reward);
        sink.record(&RoundRecord {
            t,
            arm,
            pre_reward,
            alpha,
            post_reward,
        })?;
        if cfg.victim == LearnerVariant::UcbBai && cfg.bai_stop_enabled && learner.round() >= k {
            let decision = learner.bai_stop_check();
            if decision.stopped {
                stop_round = Some(t);
                winner = decision.winner;
                break;
            }
        }
    }

    let counts = attacker.counts().to_vec();
    Ok(EpisodeSnapshot {
        rounds_run: learner.round(),
        pre_means: (0..counts.len()).map(|i| attacker.pre_mean(i)).collect(),
        post_means: (0..counts.len()).map(|i| attacker.post_mean(i)).collect(),
        cum_attack: attacker.cum_attack().to_vec(),
        total_cost: attacker.total_cost(),
        counts,
        stop_round,
        winner,
    })
}

/// Runs one episode with the full round log kept in memory.
pub fn run_episode(cfg: &EpisodeConfig) -> Result<EpisodeLog> {
    let mut rounds = Vec::new();
    let snapshot = run_episode_with(cfg, &mut rounds)?;
    Ok(EpisodeLog { rounds, snapshot })
}

/// Replays a log and reports whether every pre-attack empirical mean stayed
/// strictly within the attacker's confidence width of its true mean at every
/// round past initialization. This is the concentration event whose failure
/// voids the analytic pull cap.
pub fn check_concentration(
    rounds: &[RoundRecord],
    instance: &BanditInstance,
    delta: f64,
) -> Result<bool> {
    let k = instance.num_arms();
    let k_u64 = k as u64;
    let total = rounds.len() as u64;
    let mut counts = vec![0u64; k];
    let mut sums = vec![0.0f64; k];
    let mut last_pull = vec![0u64; k];

    let holds = |arm: usize, count: u64, sum: f64| -> Result<bool> {
        let mean = sum / count as f64;
        let width = beta_width(count, k, instance.sigma(), delta)?;
        Ok((mean - instance.means()[arm]).abs() < width)
    };

    for rec in rounds {
        let arm = rec.arm;
        // A state last refreshed during initialization persists into rounds
        // past K until the arm is pulled again; it is checked once if any
        // post-initialization round elapses while it is live.
        if counts[arm] > 0
            && last_pull[arm] <= k_u64
            && rec.t > k_u64 + 1
            && !holds(arm, counts[arm], sums[arm])?
        {
            return Ok(false);
        }
        counts[arm] += 1;
        sums[arm] += rec.pre_reward;
        last_pull[arm] = rec.t;
        if rec.t > k_u64 && !holds(arm, counts[arm], sums[arm])? {
            return Ok(false);
        }
    }
    if total > k_u64 {
        for arm in 0..k {
            if counts[arm] > 0 && last_pull[arm] <= k_u64 && !holds(arm, counts[arm], sums[arm])? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// How the pull cap's horizon argument is chosen when replaying a log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapHorizon {
    /// Evaluate the cap once at a fixed horizon (the regret victim's T).
    Fixed(u64),
    /// Re-evaluate the cap at the running round (the post-hoc view used for
    /// stopping-time analyses).
    Running,
}

/// Counts (arm, round) pairs at rounds `t >= 2K` where a non-target arm's
/// pull count exceeds `min(target count, analytic cap)`.
pub fn check_pull_cap(
    rounds: &[RoundRecord],
    bounds: &BoundConfig,
    target: usize,
    horizon: CapHorizon,
) -> Result<u64> {
    let k = bounds.num_arms();
    let start = 2 * k as u64;
    let mut counts = vec![0u64; k];
    let mut violations = 0u64;
    let fixed_cap = match horizon {
        CapHorizon::Fixed(t) => Some(bounds.nontarget_pull_cap(t)?),
        CapHorizon::Running => None,
    };
    for rec in rounds {
        counts[rec.arm] += 1;
        if rec.t < start {
            continue;
        }
        let cap = match fixed_cap {
            Some(c) => c,
            None => bounds.nontarget_pull_cap(rec.t)?,
        };
        let allowed = cap.min(counts[target] as f64);
        for (i, &n) in counts.iter().enumerate() {
            if i != target && n as f64 > allowed {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

/// Per-trial quantities compared against the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSummary {
    pub seed: RngSeed,
    pub rounds_run: u64,
    pub target_pulls: u64,
    pub total_cost: f64,
    pub concentration_held: bool,
    /// Pull-cap violations; `None` when the attack is off or the bounds are
    /// not computable for this configuration.
    pub cap_violations: Option<u64>,
    pub stop_round: Option<u64>,
    pub winner: Option<usize>,
    pub winner_is_target: Option<bool>,
    /// Whether, at the end of the episode, every arm other than the true best
    /// satisfied `count <= stop_ratio * best count`. Only evaluated for the
    /// best-arm-identification victim on instances with a unique best arm.
    pub ratio_bound_ok: Option<bool>,
}

/// Builds the summary of one episode.
pub fn summarize_episode(log: &EpisodeLog, cfg: &EpisodeConfig) -> Result<TrialSummary> {
    let target = cfg.instance.target_arm();
    let snapshot = &log.snapshot;
    let concentration_held = check_concentration(&log.rounds, &cfg.instance, cfg.delta)?;
    let cap_violations = if cfg.attack_enabled {
        match cfg.bound_config() {
            Ok(bounds) => {
                let horizon = match cfg.victim {
                    LearnerVariant::UcbRegret => CapHorizon::Fixed(cfg.resolved_horizon()?),
                    LearnerVariant::UcbBai => CapHorizon::Running,
                };
                Some(check_pull_cap(&log.rounds, &bounds, target, horizon)?)
            }
            Err(_) => None,
        }
    } else {
        None
    };
    let ratio_bound_ok = if cfg.victim == LearnerVariant::UcbBai {
        cfg.instance.unique_best_arm().map(|best| {
            let ratio = crate::bounds::stop_ratio(cfg.bai_beta).expect("validated beta");
            let best_count = snapshot.counts[best] as f64;
            snapshot
                .counts
                .iter()
                .enumerate()
                .all(|(i, &n)| i == best || n as f64 <= ratio * best_count)
        })
    } else {
        None
    };
    Ok(TrialSummary {
        seed: cfg.seed,
        rounds_run: snapshot.rounds_run,
        target_pulls: snapshot.counts[target],
        total_cost: snapshot.total_cost,
        concentration_held,
        cap_violations,
        stop_round: snapshot.stop_round,
        winner: snapshot.winner,
        winner_is_target: snapshot.winner.map(|w| w == target),
        ratio_bound_ok,
    })
}

/// SplitMix64, the documented mixing function turning a campaign seed into
/// per-trial seeds.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed schedule for a campaign.
pub fn trial_seeds(campaign_seed: u64, num_trials: usize) -> Vec<RngSeed> {
    let mut state = campaign_seed;
    (0..num_trials).map(|_| RngSeed(splitmix64(&mut state))).collect()
}

/// Empirical success rates of a campaign, next to the bound values they are
/// compared against. Fields are `None` when not applicable to the victim or
/// not computable for the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignRates {
    /// Fraction of trials where the concentration event held.
    pub concentration: f64,
    /// True iff every concentration-held trial had zero pull-cap violations.
    pub conditional_cap_ok: Option<bool>,
    /// Fraction of trials with target pulls at or above the analytic floor.
    pub target_pull_floor: Option<f64>,
    /// Fraction of trials with total cost at or below the analytic ceiling.
    pub cost_ceiling: Option<f64>,
    /// Fraction of trials where the stopping rule fired within the cap.
    pub stopped: Option<f64>,
    /// Fraction of trials stopping with the target arm as winner.
    pub stop_winner_target: Option<f64>,
    /// Fraction stopping with the target as winner no later than the
    /// guaranteed stop round.
    pub stop_by_round_bound: Option<f64>,
    /// Fraction of trials satisfying the count-ratio bound against the true
    /// best arm at episode end.
    pub ratio_bound: Option<f64>,
    pub mean_target_pulls: f64,
    pub mean_total_cost: f64,
}

/// Result of a seeded campaign: per-trial summaries, aggregate rates, and the
/// bound report they are measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignResult {
    pub campaign_seed: u64,
    pub num_trials: usize,
    pub seed_schedule: Vec<RngSeed>,
    pub bounds: Option<BoundReport>,
    pub rates: CampaignRates,
    pub trials: Vec<TrialSummary>,
}

/// Runs `num_trials` independent episodes with seeds derived from
/// `campaign_seed`, in parallel, and aggregates them. Two calls with the same
/// arguments produce identical results regardless of scheduling.
pub fn run_campaign(
    cfg: &EpisodeConfig,
    num_trials: usize,
    campaign_seed: u64,
) -> Result<CampaignResult> {
    if num_trials == 0 {
        return Err(Error::Config("a campaign needs at least one trial".into()));
    }
    cfg.validate()?;
    let resolved = cfg.resolved()?;
    let seeds = trial_seeds(campaign_seed, num_trials);
    let trials: Vec<TrialSummary> = seeds
        .par_iter()
        .map(|&seed| {
            let trial_cfg = EpisodeConfig {
                seed,
                ..resolved.clone()
            };
            let log = run_episode(&trial_cfg)?;
            summarize_episode(&log, &trial_cfg)
        })
        .collect::<Result<_>>()?;

    let bounds = resolved
        .bound_config()
        .and_then(|b| b.report(resolved.resolved_horizon()?))
        .ok();
    let rates = aggregate(&trials, &resolved, bounds.as_ref());
    Ok(CampaignResult {
        campaign_seed,
        num_trials,
        seed_schedule: seeds,
        bounds,
        rates,
        trials,
    })
}

fn aggregate(
    trials: &[TrialSummary],
    cfg: &EpisodeConfig,
    bounds: Option<&BoundReport>,
) -> CampaignRates {
    let n = trials.len() as f64;
    let frac = |pred: &dyn Fn(&TrialSummary) -> bool| -> f64 {
        trials.iter().filter(|t| pred(t)).count() as f64 / n
    };
    let concentration = frac(&|t| t.concentration_held);
    let any_caps = trials.iter().any(|t| t.cap_violations.is_some());
    let conditional_cap_ok = any_caps.then(|| {
        trials
            .iter()
            .filter(|t| t.concentration_held)
            .all(|t| t.cap_violations == Some(0))
    });
    let is_regret = cfg.victim == LearnerVariant::UcbRegret;
    let target_pull_floor = match (is_regret && cfg.attack_enabled, bounds) {
        (true, Some(b)) => Some(frac(&|t| t.target_pulls as f64 >= b.target_pull_floor)),
        _ => None,
    };
    let cost_ceiling = match (is_regret && cfg.attack_enabled, bounds) {
        (true, Some(b)) => Some(frac(&|t| t.total_cost <= b.attack_cost_ceiling)),
        _ => None,
    };
    let is_bai = cfg.victim == LearnerVariant::UcbBai;
    let stopped = is_bai.then(|| frac(&|t| t.stop_round.is_some()));
    let stop_winner_target = is_bai.then(|| frac(&|t| t.winner_is_target == Some(true)));
    let stop_by_round_bound = match (is_bai, bounds.and_then(|b| b.sample_complexity_round)) {
        (true, Some(t_star)) => Some(frac(&|t| {
            t.winner_is_target == Some(true) && t.stop_round.is_some_and(|s| s <= t_star)
        })),
        _ => None,
    };
    let ratio_known = trials.iter().filter(|t| t.ratio_bound_ok.is_some()).count();
    let ratio_bound = (ratio_known > 0).then(|| {
        trials.iter().filter(|t| t.ratio_bound_ok == Some(true)).count() as f64
            / ratio_known as f64
    });
    CampaignRates {
        concentration,
        conditional_cap_ok,
        target_pull_floor,
        cost_ceiling,
        stopped,
        stop_winner_target,
        stop_by_round_bound,
        ratio_bound,
        mean_target_pulls: trials.iter().map(|t| t.target_pulls as f64).sum::<f64>() / n,
        mean_total_cost: trials.iter().map(|t| t.total_cost).sum::<f64>() / n,
    }
}
