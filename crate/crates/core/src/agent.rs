//! Per-cell agents: state features from windowed measurements, discrete
//! power steps, and round-robin turn taking.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::netmodel::MeasurementSample;
use crate::qlearn::{EpsilonSchedule, LearnerConfig, QLearner, TrainReport, Transition};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceFeature {
    /// Mean total interference over the cell's users.
    Aggregate,
    /// The `k` strongest per-interferer averages, strongest first.
    TopK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub interference: InterferenceFeature,
    pub include_cell_reward: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { interference: InterferenceFeature::Aggregate, include_cell_reward: true }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        let interf = match self.interference {
            InterferenceFeature::Aggregate => 1,
            InterferenceFeature::TopK(k) => k,
        };
        2 + interf + usize::from(self.include_cell_reward)
    }
}

/// The agent's view of its cell over one measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub cell_power_dbm: f64,
    pub avg_rsrp_dbm: f64,
    /// One entry for the aggregate feature, `k` entries for top-k.
    pub avg_interference_dbm: Vec<f64>,
    pub cell_reward: f64,
}

impl AgentState {
    pub fn features(&self, config: &FeatureConfig) -> Vec<f64> {
        let mut f = Vec::with_capacity(config.dim());
        f.push(self.cell_power_dbm);
        f.push(self.avg_rsrp_dbm);
        f.extend_from_slice(&self.avg_interference_dbm);
        if config.include_cell_reward {
            f.push(self.cell_reward);
        }
        f
    }

    pub fn is_finite(&self) -> bool {
        self.cell_power_dbm.is_finite()
            && self.avg_rsrp_dbm.is_finite()
            && self.cell_reward.is_finite()
            && self.avg_interference_dbm.iter().all(|v| v.is_finite())
    }
}

/// Running sums of per-TTI cell measurements between two actions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementWindow {
    pub count: usize,
    pub sum_rsrp_w: f64,
    pub sum_interference_w: f64,
    pub sum_per_cell_w: Vec<f64>,
}

impl MeasurementWindow {
    pub fn push(&mut self, sample: &MeasurementSample) {
        if self.sum_per_cell_w.len() != sample.interference_per_cell_w.len() {
            self.sum_per_cell_w = alloc::vec![0.0; sample.interference_per_cell_w.len()];
        }
        self.count += 1;
        self.sum_rsrp_w += sample.rsrp_w;
        self.sum_interference_w += sample.interference_w;
        for (s, v) in self.sum_per_cell_w.iter_mut().zip(&sample.interference_per_cell_w) {
            *s += v;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn clear(&mut self) {
        self.count = 0;
        self.sum_rsrp_w = 0.0;
        self.sum_interference_w = 0.0;
        self.sum_per_cell_w.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Averages the window in linear units, then converts to dBm.
pub fn extract_state(
    window: &MeasurementWindow,
    cell_power_dbm: f64,
    cell_reward: f64,
    features: &FeatureConfig,
    own_cell: usize,
) -> Result<AgentState> {
    if window.is_empty() {
        return Err(Error::EmptyInput("measurement window"));
    }
    let n = window.count as f64;
    let avg_interference_dbm = match features.interference {
        InterferenceFeature::Aggregate => alloc::vec![math::watts_to_dbm(window.sum_interference_w / n)],
        InterferenceFeature::TopK(k) => {
            let mut per: Vec<f64> =
                window.sum_per_cell_w.iter().enumerate().filter(|(c, _)| *c != own_cell).map(|(_, s)| s / n).collect();
            per.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
            per.resize(k, 0.0);
            per.into_iter().map(math::watts_to_dbm).collect()
        }
    };
    Ok(AgentState {
        cell_power_dbm,
        avg_rsrp_dbm: math::watts_to_dbm(window.sum_rsrp_w / n),
        avg_interference_dbm,
        cell_reward,
    })
}

/// Discrete power adjustments in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    pub deltas_db: Vec<f64>,
}

impl Default for ActionSet {
    fn default() -> Self {
        Self { deltas_db: alloc::vec![0.0, 1.0, -1.0, 3.0, -3.0] }
    }
}

impl ActionSet {
    pub fn validate(&self) -> Result<()> {
        if !self.deltas_db.contains(&0.0) {
            return Err(Error::InvalidConfig("action set must contain 0 dB".into()));
        }
        for d in &self.deltas_db {
            if !self.deltas_db.contains(&-d) {
                return Err(Error::InvalidConfig(alloc::format!("action set is not symmetric: missing {}", -d)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.deltas_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas_db.is_empty()
    }
}

pub fn apply_action(power_dbm: f64, delta_db: f64, min_dbm: f64, max_dbm: f64) -> f64 {
    (power_dbm + delta_db).clamp(min_dbm, max_dbm)
}

/// Round-robin turn taking: exactly one agent acts at every multiple of the
/// action period.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinator {
    pub order: Vec<usize>,
    pub action_period_ms: u64,
    pub turn: usize,
}

impl Coordinator {
    pub fn round_robin(num_agents: usize, action_period_ms: u64) -> Self {
        Self { order: (0..num_agents).collect(), action_period_ms, turn: 0 }
    }

    /// Returns the acting agent when `now_ms` is a positive multiple of the
    /// period, advancing the turn.
    pub fn agent_turn(&mut self, now_ms: u64) -> Option<usize> {
        if self.order.is_empty() || now_ms == 0 || !now_ms.is_multiple_of(self.action_period_ms) {
            return None;
        }
        let agent = self.order[self.turn % self.order.len()];
        self.turn += 1;
        Some(agent)
    }

    pub fn reset(&mut self) {
        self.turn = 0;
    }

    /// Length of the window between two consecutive actions of one agent.
    pub fn agent_period_ms(&self) -> u64 {
        self.action_period_ms * self.order.len() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    /// Exploration pinned to the schedule's minimum.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub actions: ActionSet,
    pub epsilon: EpsilonSchedule,
    pub policy_update_period: usize,
    pub features: FeatureConfig,
    pub learner: LearnerConfig,
    pub min_power_dbm: f64,
    pub max_power_dbm: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            actions: ActionSet::default(),
            epsilon: EpsilonSchedule::default(),
            policy_update_period: 50,
            features: FeatureConfig::default(),
            learner: LearnerConfig::default(),
            min_power_dbm: 10.0,
            max_power_dbm: 46.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        self.actions.validate()?;
        self.epsilon.validate()?;
        self.learner.validate()?;
        if self.policy_update_period == 0 {
            return Err(Error::InvalidConfig("policy update period must be >= 1".into()));
        }
        if !(self.min_power_dbm <= self.max_power_dbm) {
            return Err(Error::InvalidConfig("min power exceeds max power".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub action_index: usize,
    pub delta_db: f64,
    pub power_dbm: f64,
    pub epsilon: f64,
    pub transition: Option<Transition>,
    pub retrained: Option<TrainReport>,
}

/// RL agent controlling one cell's power budget.
#[derive(Debug, Clone)]
pub struct Agent {
    pub cell: usize,
    pub config: AgentConfig,
    pub learner: QLearner,
    pub rng: SimRng,
    pub action_count: u64,
    pub samples_since_update: usize,
    pending: Option<(Vec<f64>, usize)>,
}

impl Agent {
    pub fn new(cell: usize, config: AgentConfig, init_rng: &mut SimRng, exploration: SimRng) -> Result<Self> {
        config.validate()?;
        let learner = QLearner::new(config.features.dim(), config.actions.len(), config.learner.clone(), init_rng)?;
        Ok(Self { cell, config, learner, rng: exploration, action_count: 0, samples_since_update: 0, pending: None })
    }

    /// Forgets the open transition; states do not chain across drops.
    pub fn begin_drop(&mut self) {
        self.pending = None;
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    /// Closes the pending transition with `state` and `reward`, retrains when
    /// enough new samples have accumulated, then picks and applies the next
    /// power step.
    pub fn agent_step(&mut self, state: &AgentState, reward: f64, power_dbm: f64, phase: Phase) -> Result<StepOutcome> {
        let features = state.features(&self.config.features);
        let mut transition = None;
        let mut retrained = None;
        if let Some((prev, action)) = self.pending.take() {
            let t = Transition { state: prev, action, reward, next_state: features.clone() };
            if self.learner.record(t.clone())? {
                self.samples_since_update += 1;
            }
            transition = Some(t);
            if self.samples_since_update >= self.config.policy_update_period {
                self.samples_since_update = 0;
                retrained = Some(self.learner.train_round()?);
            }
        }

        let epsilon = if transition.is_none() {
            1.0
        } else {
            match phase {
                Phase::Train => self.config.epsilon.epsilon_at(self.action_count),
                Phase::Eval => self.config.epsilon.eps_min,
            }
        };
        let u: f64 = self.rng.gen();
        let action_index = if u < epsilon {
            self.rng.gen_range(0..self.config.actions.len())
        } else {
            self.learner.greedy_action(&features)?
        };
        self.action_count += 1;
        let delta_db = self.config.actions.deltas_db[action_index];
        let power = apply_action(power_dbm, delta_db, self.config.min_power_dbm, self.config.max_power_dbm);
        self.pending = Some((features, action_index));
        Ok(StepOutcome { action_index, delta_db, power_dbm: power, epsilon, transition, retrained })
    }
}
