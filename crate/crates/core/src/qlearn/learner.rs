use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SimRng;

use super::batch::{train, FeatureScaler, GrowingBatch, TrainReport, Transition};
use super::net::QApproximator;
use super::rprop::{RpropParams, RpropState};

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub hidden: Vec<usize>,
    pub epochs_per_round: usize,
    pub rprop: RpropParams,
    /// Initial weights are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub reward_scaling: RewardScaling,
}

/// Affine reward normalization inside the learner. Positive scaling and
/// constant shifts leave the optimal policy of a discounted task unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardScaling {
    None,
    /// Divide by the running max |reward|.
    MaxAbs,
    /// Map the running [min, max] reward range onto [-1, 1].
    MinMax,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.7,
            hidden: QApproximator::DEFAULT_HIDDEN.to_vec(),
            epochs_per_round: 50,
            rprop: RpropParams::default(),
            init_scale: 0.1,
            reward_scaling: RewardScaling::MinMax,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(alloc::format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.epochs_per_round == 0 {
            return Err(Error::InvalidConfig("epochs per round must be >= 1".into()));
        }
        self.rprop.validate()
    }
}

/// A Q-network together with its raw growing batch, the feature and reward
/// normalization derived from that batch, and its RPROP state.
#[derive(Debug, Clone, PartialEq)]
pub struct QLearner {
    pub config: LearnerConfig,
    pub net: QApproximator,
    pub rprop: RpropState,
    pub batch: GrowingBatch,
    /// Running ranges over the batch.
    pub scaler: FeatureScaler,
    /// Ranges the net was last fitted with; used for action selection so
    /// new samples do not shift its inputs between training rounds.
    pub policy_scaler: FeatureScaler,
    /// Running reward range `(min, max)`.
    pub reward_range: (f64, f64),
    pub rounds: usize,
}

impl QLearner {
    pub fn new(state_dim: usize, num_actions: usize, config: LearnerConfig, rng: &mut SimRng) -> Result<Self> {
        config.validate()?;
        let net = QApproximator::random(state_dim, num_actions, &config.hidden, config.init_scale, rng);
        let rprop = RpropState::new(net.num_params(), config.rprop);
        Ok(Self {
            config,
            net,
            rprop,
            batch: GrowingBatch::new(),
            scaler: FeatureScaler::default(),
            policy_scaler: FeatureScaler::default(),
            reward_range: (f64::INFINITY, f64::NEG_INFINITY),
            rounds: 0,
        })
    }

    /// Appends a raw transition and widens the normalization ranges.
    pub fn record(&mut self, t: Transition) -> Result<bool> {
        if t.state.len() != self.net.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.net.state_dim(), got: t.state.len() });
        }
        self.scaler.observe(&t.state);
        self.scaler.observe(&t.next_state);
        self.reward_range = (self.reward_range.0.min(t.reward), self.reward_range.1.max(t.reward));
        self.batch.push(t)
    }

    pub fn normalize_state(&self, raw: &[f64]) -> Vec<f64> {
        self.policy_scaler.normalize(raw)
    }

    pub fn normalize_reward(&self, r: f64) -> f64 {
        let (lo, hi) = self.reward_range;
        if lo > hi {
            return r;
        }
        match self.config.reward_scaling {
            RewardScaling::None => r,
            RewardScaling::MaxAbs => {
                let m = lo.abs().max(hi.abs());
                if m > 0.0 {
                    r / m
                } else {
                    r
                }
            }
            RewardScaling::MinMax => {
                if hi > lo {
                    2.0 * (r - lo) / (hi - lo) - 1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// The batch scaled with the current running ranges.
    pub fn normalized_batch(&self) -> Vec<Transition> {
        self.batch
            .iter()
            .map(|t| Transition {
                state: self.scaler.normalize(&t.state),
                action: t.action,
                reward: self.normalize_reward(t.reward),
                next_state: self.scaler.normalize(&t.next_state),
            })
            .collect()
    }

    /// Warm-started fitted-Q round over the whole batch.
    pub fn train_round(&mut self) -> Result<TrainReport> {
        let data = self.normalized_batch();
        self.policy_scaler = self.scaler.clone();
        let report = train(&mut self.net, &data, self.config.gamma, &mut self.rprop, self.config.epochs_per_round)?;
        self.rounds += 1;
        Ok(report)
    }

    pub fn q_values(&self, raw_state: &[f64]) -> Result<Vec<f64>> {
        self.net.q_values(&self.normalize_state(raw_state))
    }

    pub fn greedy_action(&self, raw_state: &[f64]) -> Result<usize> {
        self.net.greedy_action(&self.normalize_state(raw_state))
    }
}
