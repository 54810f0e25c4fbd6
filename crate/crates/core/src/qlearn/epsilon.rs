use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SimRng;

use super::net::QApproximator;

/// Exploration probability annealed linearly from `eps_max` to `eps_min`
/// over `decay_actions` actions, then held at `eps_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub eps_max: f64,
    pub eps_min: f64,
    pub decay_actions: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { eps_max: 0.9, eps_min: 0.1, decay_actions: 200 }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.eps_min && self.eps_min <= self.eps_max && self.eps_max <= 1.0) || self.decay_actions == 0 {
            return Err(Error::InvalidConfig(alloc::format!("invalid epsilon schedule {self:?}")));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, action_count: u64) -> f64 {
        if action_count >= self.decay_actions {
            return self.eps_min;
        }
        let frac = action_count as f64 / self.decay_actions as f64;
        self.eps_max - (self.eps_max - self.eps_min) * frac
    }
}

/// Epsilon-greedy choice: a uniform random action with probability
/// `epsilon`, otherwise the greedy one.
pub fn select_action(net: &QApproximator, state: &[f64], epsilon: f64, rng: &mut SimRng) -> Result<usize> {
    let u: f64 = rng.gen();
    if u < epsilon {
        Ok(rng.gen_range(0..net.num_actions()))
    } else {
        net.greedy_action(state)
    }
}
