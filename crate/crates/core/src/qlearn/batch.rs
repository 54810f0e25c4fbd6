use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::net::{QApproximator, Workspace};
use super::rprop::RpropState;

/// One `(s, a, r, s')` observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Append-only transition store reused in full at every training round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrowingBatch {
    transitions: Vec<Transition>,
    capacity: Option<usize>,
}

impl GrowingBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity_limit(capacity: usize) -> Self {
        Self { transitions: Vec::new(), capacity: Some(capacity) }
    }

    /// Appends unless the optional capacity is reached; returns whether the
    /// transition was stored.
    pub fn push(&mut self, t: Transition) -> Result<bool> {
        if t.state.len() != t.next_state.len() {
            return Err(Error::DimensionMismatch { expected: t.state.len(), got: t.next_state.len() });
        }
        if let Some(first) = self.transitions.first() {
            if first.state.len() != t.state.len() {
                return Err(Error::DimensionMismatch { expected: first.state.len(), got: t.state.len() });
            }
        }
        if self.capacity.is_some_and(|c| self.transitions.len() >= c) {
            return Ok(false);
        }
        self.transitions.push(t);
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Transition> {
        self.transitions.iter()
    }
}

/// Running per-feature min/max mapping raw features onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn observe(&mut self, x: &[f64]) {
        if self.min.is_empty() {
            self.min = x.to_vec();
            self.max = x.to_vec();
            return;
        }
        for ((lo, hi), &v) in self.min.iter_mut().zip(self.max.iter_mut()).zip(x) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }

    /// Features with a degenerate range map to 0.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        if self.min.is_empty() {
            return alloc::vec![0.0; x.len()];
        }
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { 2.0 * (v - lo) / (hi - lo) - 1.0 } else { 0.0 })
            .collect()
    }
}

/// Bellman targets `r + gamma * max_a' Q(s', a')` under the current network.
pub fn compute_targets(transitions: &[Transition], net: &QApproximator, gamma: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(alloc::format!("gamma must lie in [0, 1), got {gamma}")));
    }
    let mut ws = Workspace::default();
    transitions
        .iter()
        .map(|t| {
            if t.next_state.len() != net.state_dim() {
                return Err(Error::DimensionMismatch { expected: net.state_dim(), got: t.next_state.len() });
            }
            Ok(if gamma == 0.0 { t.reward } else { t.reward + gamma * net.max_q(&t.next_state, &mut ws) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    /// Loss before each epoch's update.
    pub losses: Vec<f64>,
    /// False when a non-finite loss aborted the round and the weights were
    /// restored.
    pub completed: bool,
}

/// Full-batch gradient of `0.5 * sum (target - Q(s, a))^2` at the current
/// weights, with `targets` held fixed.
pub fn batch_gradient(
    net: &QApproximator,
    transitions: &[Transition],
    targets: &[f64],
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    transitions.iter().zip(targets).map(|(t, &y)| net.accumulate_gradient(&t.state, t.action, y, grad, ws)).sum()
}

/// One policy-update round: targets are computed once from the incoming
/// network, then `epochs` RPROP steps follow on the full batch.
pub fn train(
    net: &mut QApproximator,
    transitions: &[Transition],
    gamma: f64,
    rprop: &mut RpropState,
    epochs: usize,
) -> Result<TrainReport> {
    if transitions.is_empty() {
        return Err(Error::EmptyInput("training batch"));
    }
    if rprop.len() != net.num_params() {
        return Err(Error::DimensionMismatch { expected: net.num_params(), got: rprop.len() });
    }
    for t in transitions {
        if t.state.len() != net.state_dim() {
            return Err(Error::DimensionMismatch { expected: net.state_dim(), got: t.state.len() });
        }
        if t.action >= net.num_actions() {
            return Err(Error::DimensionMismatch { expected: net.num_actions(), got: t.action + 1 });
        }
    }
    let targets = compute_targets(transitions, net, gamma)?;
    let saved_params = net.params().to_vec();
    let saved_rprop = rprop.clone();
    let mut grad = alloc::vec![0.0; net.num_params()];
    let mut ws = Workspace::default();
    let mut report = TrainReport { losses: Vec::with_capacity(epochs), completed: true };
    for _ in 0..epochs {
        let loss = batch_gradient(net, transitions, &targets, &mut grad, &mut ws);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            net.params_mut().copy_from_slice(&saved_params);
            *rprop = saved_rprop;
            report.completed = false;
            return Ok(report);
        }
        report.losses.push(loss);
        rprop.rprop_step(&grad, net.params_mut())?;
    }
    if !net.is_finite() {
        net.params_mut().copy_from_slice(&saved_params);
        *rprop = saved_rprop;
        report.completed = false;
    }
    Ok(report)
}
