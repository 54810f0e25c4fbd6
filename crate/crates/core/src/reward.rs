//! Alpha-fair reward family and its network-wide aggregation.
//!
//! For `alpha != 1` the utility of values `x` with weights `w` is
//! `1/(1-alpha) * sum w_i (x_i^(1-alpha) - 1)`; `alpha == 1` takes the
//! analytic limit `sum w_i ln x_i`.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math;

/// The six closed-form rewards on per-user throughputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CanonicalReward {
    /// alpha = 0, weights 1/|X|.
    MeanUserTput,
    /// alpha = 0, unit weights.
    SumCellTput,
    /// alpha = 1, weights 1/|X|.
    MeanLogTput,
    /// alpha = 1, unit weights.
    SumLogTput,
    /// alpha = 2, weights 1/|X|: |X| / sum(1/x).
    HarmonicMeanTput,
    /// alpha = 2, unit weights: 1 / sum(1/x).
    InverseSumInverseTput,
}

impl CanonicalReward {
    pub const ALL: [CanonicalReward; 6] = [
        Self::MeanUserTput,
        Self::SumCellTput,
        Self::MeanLogTput,
        Self::SumLogTput,
        Self::HarmonicMeanTput,
        Self::InverseSumInverseTput,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MeanUserTput => "mean_user_tput",
            Self::SumCellTput => "sum_cell_tput",
            Self::MeanLogTput => "mean_log_tput",
            Self::SumLogTput => "sum_log_tput",
            Self::HarmonicMeanTput => "harmonic_mean_tput",
            Self::InverseSumInverseTput => "inverse_sum_inverse_tput",
        }
    }

    pub fn alpha(self) -> f64 {
        match self {
            Self::MeanUserTput | Self::SumCellTput => 0.0,
            Self::MeanLogTput | Self::SumLogTput => 1.0,
            Self::HarmonicMeanTput | Self::InverseSumInverseTput => 2.0,
        }
    }

    pub fn weight_mode(self) -> WeightMode {
        match self {
            Self::MeanUserTput | Self::MeanLogTput | Self::HarmonicMeanTput => WeightMode::Uniform,
            Self::SumCellTput | Self::SumLogTput | Self::InverseSumInverseTput => WeightMode::Unit,
        }
    }
}

impl fmt::Display for CanonicalReward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CanonicalReward {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown reward kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// w_i = 1/|X|
    Uniform,
    /// w_i = 1
    Unit,
}

impl WeightMode {
    pub fn weights(self, n: usize) -> Vec<f64> {
        let w = match self {
            Self::Uniform => 1.0 / n as f64,
            Self::Unit => 1.0,
        };
        alloc::vec![w; n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Pool every user in the network and evaluate the reward once.
    NetworkPool,
    /// Evaluate per cell and add the cell rewards.
    SumOfCellRewards,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub alpha: f64,
    pub weight_mode: WeightMode,
    pub aggregation: Aggregation,
    /// When set, rewards use the closed form of this kind.
    pub canonical: Option<CanonicalReward>,
    /// Restricts an agent's network reward to cells whose site lies within
    /// this distance of its own; `None` means every cell.
    pub neighbor_radius_m: Option<f64>,
}

impl RewardConfig {
    pub fn canonical(kind: CanonicalReward) -> Self {
        Self {
            alpha: kind.alpha(),
            weight_mode: kind.weight_mode(),
            aggregation: Aggregation::NetworkPool,
            canonical: Some(kind),
            neighbor_radius_m: None,
        }
    }

    pub fn alpha_fair(alpha: f64, weight_mode: WeightMode) -> Self {
        Self { alpha, weight_mode, aggregation: Aggregation::NetworkPool, canonical: None, neighbor_radius_m: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if let Some(kind) = self.canonical {
            if kind.alpha() != self.alpha || kind.weight_mode() != self.weight_mode {
                return Err(Error::InvalidConfig(alloc::format!(
                    "reward kind {kind} requires alpha {} with {:?} weights",
                    kind.alpha(),
                    kind.weight_mode()
                )));
            }
        }
        Ok(())
    }

    /// Reward of a single group of throughputs (one cell, or the pool).
    pub fn evaluate(&self, values: &[f64]) -> Result<f64> {
        match self.canonical {
            Some(kind) => canonical_reward(kind, values),
            None => {
                if values.is_empty() {
                    return Err(Error::EmptyInput("reward values"));
                }
                alpha_fair(values, self.alpha, &self.weight_mode.weights(values.len()))
            }
        }
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self::canonical(CanonicalReward::HarmonicMeanTput)
    }
}

pub fn alpha_fair(values: &[f64], alpha: f64, weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), got: weights.len() });
    }
    if let Some(&bad) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositive { what: "alpha-fair argument", value: bad });
    }
    let one_minus = 1.0 - alpha;
    let total = values
        .iter()
        .zip(weights)
        .map(|(&x, &w)| {
            let l = math::ln(x);
            if alpha == 1.0 {
                w * l
            } else {
                // expm1 keeps the expression accurate as alpha approaches 1.
                w * math::exp_m1(one_minus * l) / one_minus
            }
        })
        .sum();
    Ok(total)
}

pub fn canonical_reward(kind: CanonicalReward, values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("reward values"));
    }
    if let Some(&bad) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositive { what: "throughput", value: bad });
    }
    let n = values.len() as f64;
    let sum = || values.iter().sum::<f64>();
    let sum_log = || values.iter().map(|&x| math::ln(x)).sum::<f64>();
    let sum_inv = || values.iter().map(|&x| 1.0 / x).sum::<f64>();
    Ok(match kind {
        CanonicalReward::MeanUserTput => sum() / n,
        CanonicalReward::SumCellTput => sum(),
        CanonicalReward::MeanLogTput => sum_log() / n,
        CanonicalReward::SumLogTput => sum_log(),
        CanonicalReward::HarmonicMeanTput => n / sum_inv(),
        CanonicalReward::InverseSumInverseTput => 1.0 / sum_inv(),
    })
}

/// Network reward over per-cell throughput lists. Empty cells are skipped.
pub fn network_reward<V: AsRef<[f64]>>(per_cell: &[V], config: &RewardConfig) -> Result<f64> {
    match config.aggregation {
        Aggregation::NetworkPool => {
            let pooled: Vec<f64> = per_cell.iter().flat_map(|c| c.as_ref().iter().copied()).collect();
            if pooled.is_empty() {
                return Err(Error::EmptyInput("network has no users"));
            }
            config.evaluate(&pooled)
        }
        Aggregation::SumOfCellRewards => {
            let mut any = false;
            let mut total = 0.0;
            for cell in per_cell.iter().map(|c| c.as_ref()).filter(|c| !c.is_empty()) {
                any = true;
                total += config.evaluate(cell)?;
            }
            if !any {
                return Err(Error::EmptyInput("network has no users"));
            }
            Ok(total)
        }
    }
}
