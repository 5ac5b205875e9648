//! Bandit problem instances: true arm means, sub-Gaussian reward sampling,
//! and ground-truth gaps relative to the target arm.
//!
//! Instances are immutable after construction and safe to share across
//! concurrent trials. Random state is single-owner: every episode builds its
//! own generator from an [`RngSeed`].

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reward distribution family. Both choices are sigma^2-sub-Gaussian: the
/// Gaussian with scale `sigma`, and the Bernoulli with the fixed scale 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardFamily {
    #[default]
    Gaussian,
    Bernoulli,
}

/// Serialized form of [`BanditInstance`]. The target arm is implied: it is
/// always the last arm, so reordering `means` selects the target.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub means: Vec<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub reward_family: RewardFamily,
}

/// A stochastic bandit problem with K arms, fixed true means, and a known
/// sub-Gaussian noise scale.
///
/// Ground truth (`means`) is only read by the environment when sampling and
/// by post-hoc diagnostics; learners and attackers never see it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceConfig", into = "InstanceConfig")]
pub struct BanditInstance {
    means: Vec<f64>,
    sigma: f64,
    target_arm: usize,
    reward_family: RewardFamily,
}

impl TryFrom<InstanceConfig> for BanditInstance {
    type Error = Error;

    fn try_from(cfg: InstanceConfig) -> Result<Self> {
        Self::new(cfg.means, cfg.sigma, cfg.reward_family)
    }
}

impl From<BanditInstance> for InstanceConfig {
    fn from(inst: BanditInstance) -> Self {
        InstanceConfig {
            means: inst.means,
            sigma: inst.sigma,
            reward_family: inst.reward_family,
        }
    }
}

impl BanditInstance {
    /// Builds an instance. The target arm is fixed as the last arm.
    ///
    /// The Bernoulli family requires all means in [0, 1] and `sigma == 0.5`,
    /// the sub-Gaussian scale of a Bernoulli.
    pub fn new(means: Vec<f64>, sigma: f64, reward_family: RewardFamily) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::Config(format!(
                "an instance needs at least 2 arms, got {}",
                means.len()
            )));
        }
        if !means.iter().all(|m| m.is_finite()) {
            return Err(Error::Config("arm means must be finite".into()));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        if reward_family == RewardFamily::Bernoulli {
            if !means.iter().all(|&m| (0.0..=1.0).contains(&m)) {
                return Err(Error::Config(
                    "bernoulli rewards require all means in [0, 1]".into(),
                ));
            }
            if sigma != 0.5 {
                return Err(Error::Config(format!(
                    "bernoulli rewards have sub-Gaussian scale 0.5, got sigma = {sigma}"
                )));
            }
        }
        let target_arm = means.len() - 1;
        Ok(Self {
            means,
            sigma,
            target_arm,
            reward_family,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Index of the adversary's target arm (always the last arm).
    pub fn target_arm(&self) -> usize {
        self.target_arm
    }

    pub fn reward_family(&self) -> RewardFamily {
        self.reward_family
    }

    /// Draws one pre-attack reward for `arm`, advancing `rng` deterministically.
    pub fn sample_reward<R: Rng>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        let mean = *self.means.get(arm).ok_or_else(|| {
            Error::Contract(format!(
                "arm index {arm} out of range for {} arms",
                self.num_arms()
            ))
        })?;
        Ok(match self.reward_family {
            RewardFamily::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                mean + self.sigma * z
            }
            RewardFamily::Bernoulli => {
                if rng.gen_bool(mean) {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// Per-arm gaps relative to the target arm.
    pub fn gaps(&self) -> Gaps {
        let target_mean = self.means[self.target_arm];
        Gaps(
            self.means
                .iter()
                .map(|&m| (m - target_mean).max(0.0))
                .collect(),
        )
    }

    /// Index of the true best arm if it is unique, else `None`.
    pub fn unique_best_arm(&self) -> Option<usize> {
        let (best, &best_mean) = self
            .means
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("means are finite"))?;
        let ties = self.means.iter().filter(|&&m| m == best_mean).count();
        (ties == 1).then_some(best)
    }
}

/// Per-arm gaps `max(mu_i - mu_target, 0)`; exactly zero for the target arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gaps(Vec<f64>);

impl Gaps {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("gaps must be finite and nonnegative".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Seed for the reproducible per-episode generator.
///
/// The generator identity is pinned: ChaCha with 8 rounds keyed by this
/// 64-bit seed (`ChaCha8Rng::seed_from_u64`), a counter-based stream cipher
/// whose output is platform-independent. Identical seed and configuration
/// give bit-identical reward streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        Self(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(means: &[f64], sigma: f64) -> BanditInstance {
        BanditInstance::new(means.to_vec(), sigma, RewardFamily::Gaussian).unwrap()
    }

    #[test]
    fn rejects_degenerate_instances() {
        assert!(BanditInstance::new(vec![0.5], 1.0, RewardFamily::Gaussian).is_err());
        assert!(BanditInstance::new(vec![0.5, 0.4], 0.0, RewardFamily::Gaussian).is_err());
        assert!(BanditInstance::new(vec![0.5, 0.4], -1.0, RewardFamily::Gaussian).is_err());
        assert!(BanditInstance::new(vec![0.5, f64::NAN], 1.0, RewardFamily::Gaussian).is_err());
        // Bernoulli constraints: means in [0,1] and sigma = 1/2.
        assert!(BanditInstance::new(vec![0.5, 1.2], 0.5, RewardFamily::Bernoulli).is_err());
        assert!(BanditInstance::new(vec![0.5, 0.4], 0.3, RewardFamily::Bernoulli).is_err());
        assert!(BanditInstance::new(vec![0.5, 0.4], 0.5, RewardFamily::Bernoulli).is_ok());
    }

    #[test]
    fn target_arm_is_last() {
        let inst = gaussian(&[0.9, 0.8, 0.5], 0.1);
        assert_eq!(inst.target_arm(), 2);
    }

    #[test]
    fn sampling_is_deterministic_for_fixed_seed() {
        let inst = gaussian(&[0.5, 0.3], 0.1);
        let a = inst.sample_reward(0, &mut RngSeed(42).rng()).unwrap();
        let b = inst.sample_reward(0, &mut RngSeed(42).rng()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn degenerate_bernoulli_always_one() {
        let inst = BanditInstance::new(vec![0.0, 1.0], 0.5, RewardFamily::Bernoulli).unwrap();
        let mut rng = RngSeed(7).rng();
        for _ in 0..100 {
            assert_eq!(inst.sample_reward(1, &mut rng).unwrap(), 1.0);
            assert_eq!(inst.sample_reward(0, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn arm_out_of_range_is_a_contract_violation() {
        let inst = gaussian(&[0.5, 0.3], 0.1);
        assert!(matches!(
            inst.sample_reward(2, &mut RngSeed(0).rng()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn gaps_match_definition() {
        let inst = gaussian(&[0.9, 0.5], 1.0);
        assert_eq!(inst.gaps().values(), &[0.4, 0.0]);
        let inst = gaussian(&[0.2, 0.5], 1.0);
        assert_eq!(inst.gaps().values(), &[0.0, 0.0]);
        let inst = gaussian(&[1.0, 0.7, 0.4], 1.0);
        for (got, expect) in inst.gaps().values().iter().zip([0.6, 0.3, 0.0]) {
            assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
        }
    }

    #[test]
    fn empirical_mean_tracks_true_mean() {
        // Law-of-large-numbers sanity: 1e6 draws land within 5 sigma / 1000.
        let inst = gaussian(&[0.25, 0.75], 0.2);
        let mut rng = RngSeed(123).rng();
        let n = 1_000_000u32;
        for arm in 0..2 {
            let mut sum = 0.0;
            for _ in 0..n {
                sum += inst.sample_reward(arm, &mut rng).unwrap();
            }
            let err = (sum / f64::from(n) - inst.means()[arm]).abs();
            assert!(err < 5.0 * inst.sigma() / 1000.0, "arm {arm} err {err}");
        }
    }

    #[test]
    fn unique_best_arm_detection() {
        assert_eq!(gaussian(&[0.9, 0.8, 0.5], 0.1).unique_best_arm(), Some(0));
        assert_eq!(gaussian(&[0.9, 0.9, 0.5], 0.1).unique_best_arm(), None);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Gap vectors are invariant (up to float rounding) under a common
            // shift of all means.
            #[test]
            fn gaps_shift_invariant(
                base in proptest::collection::vec(-10.0f64..10.0, 2..8),
                shift in -100.0f64..100.0,
            ) {
                let a = gaussian(&base, 1.0).gaps();
                let shifted: Vec<f64> = base.iter().map(|m| m + shift).collect();
                let b = gaussian(&shifted, 1.0).gaps();
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
                }
            }
        }
    }
}
