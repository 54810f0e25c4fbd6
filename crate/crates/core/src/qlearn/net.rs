use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::SimRng;

/// Feed-forward Q(s, a) approximator: the state is concatenated with a
/// one-hot action code, hidden layers use `tanh`, the scalar output is linear.
///
/// Parameters live in one flat vector; each layer stores its row-major
/// `out x in` weight matrix followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct QApproximator {
    state_dim: usize,
    num_actions: usize,
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Scratch buffers for forward and backward passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    input: Vec<f64>,
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl QApproximator {
    pub const DEFAULT_HIDDEN: [usize; 3] = [32, 32, 16];

    /// All-zero network.
    pub fn zeros(state_dim: usize, num_actions: usize, hidden: &[usize]) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(state_dim + num_actions);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut n = 0;
        for w in sizes.windows(2) {
            offsets.push(n);
            n += w[0] * w[1] + w[1];
        }
        Self { state_dim, num_actions, sizes, offsets, params: alloc::vec![0.0; n] }
    }

    /// Parameters drawn uniformly from `[-scale, scale]`.
    pub fn random(state_dim: usize, num_actions: usize, hidden: &[usize], scale: f64, rng: &mut SimRng) -> Self {
        let mut net = Self::zeros(state_dim, num_actions, hidden);
        for p in net.params.iter_mut() {
            *p = rng.gen_range(-scale..=scale);
        }
        net
    }

    pub fn from_params(state_dim: usize, num_actions: usize, hidden: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(state_dim, num_actions, hidden);
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch { expected: net.params.len(), got: params.len() });
        }
        net.params = params;
        Ok(net)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn hidden(&self) -> &[usize] {
        &self.sizes[1..self.sizes.len() - 1]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn output_bias_mut(&mut self) -> &mut f64 {
        self.params.last_mut().expect("network has an output unit")
    }

    fn check(&self, state: &[f64], action: usize) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::DimensionMismatch { expected: self.state_dim, got: state.len() });
        }
        if action >= self.num_actions {
            return Err(Error::DimensionMismatch { expected: self.num_actions, got: action + 1 });
        }
        Ok(())
    }

    fn encode(&self, state: &[f64], action: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(state);
        out.extend((0..self.num_actions).map(|a| if a == action { 1.0 } else { 0.0 }));
    }

    fn forward(&self, ws: &mut Workspace) -> f64 {
        let layers = self.sizes.len() - 1;
        ws.acts.resize(layers, Vec::new());
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let offset = self.offsets[l];
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let (prev, rest) = ws.acts.split_at_mut(l);
            let input: &[f64] = if l == 0 { &ws.input } else { &prev[l - 1] };
            let out = &mut rest[0];
            out.clear();
            for j in 0..n_out {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let z = biases[j] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
                out.push(if l + 1 < layers { math::tanh(z) } else { z });
            }
        }
        ws.acts[layers - 1][0]
    }

    pub fn predict_q(&self, state: &[f64], action: usize) -> Result<f64> {
        self.check(state, action)?;
        let mut ws = Workspace::default();
        Ok(self.predict_with(state, action, &mut ws))
    }

    /// Like [`predict_q`](Self::predict_q) without dimension checks.
    pub fn predict_with(&self, state: &[f64], action: usize, ws: &mut Workspace) -> f64 {
        let mut input = core::mem::take(&mut ws.input);
        self.encode(state, action, &mut input);
        ws.input = input;
        self.forward(ws)
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check(state, 0)?;
        let mut ws = Workspace::default();
        Ok((0..self.num_actions).map(|a| self.predict_with(state, a, &mut ws)).collect())
    }

    /// Highest-valued action; ties go to the lowest index.
    pub fn greedy_action(&self, state: &[f64]) -> Result<usize> {
        Ok(argmax(&self.q_values(state)?))
    }

    pub fn max_q(&self, state: &[f64], ws: &mut Workspace) -> f64 {
        (0..self.num_actions).map(|a| self.predict_with(state, a, ws)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Adds the gradient of `0.5 * (Q(s, a) - target)^2` to `grad` and returns
    /// that loss term.
    pub fn accumulate_gradient(
        &self,
        state: &[f64],
        action: usize,
        target: f64,
        grad: &mut [f64],
        ws: &mut Workspace,
    ) -> f64 {
        let q = self.predict_with(state, action, ws);
        let err = q - target;
        let layers = self.sizes.len() - 1;
        ws.deltas.resize(layers, Vec::new());
        ws.deltas[layers - 1].clear();
        ws.deltas[layers - 1].push(err);

        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let base = self.offsets[l];
            let input: &[f64] = if l == 0 { &ws.input } else { &ws.acts[l - 1] };
            let delta = &ws.deltas[l];
            for j in 0..n_out {
                let d = delta[j];
                let row = &mut grad[base + j * n_in..base + (j + 1) * n_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[base + n_in * n_out + j] += d;
            }
            if l > 0 {
                let weights = &self.params[base..base + n_in * n_out];
                let mut back = core::mem::take(&mut ws.deltas[l - 1]);
                back.clear();
                back.resize(n_in, 0.0);
                for j in 0..n_out {
                    let d = ws.deltas[l][j];
                    for (b, w) in back.iter_mut().zip(&weights[j * n_in..(j + 1) * n_in]) {
                        *b += w * d;
                    }
                }
                for (b, a) in back.iter_mut().zip(&ws.acts[l - 1]) {
                    *b *= 1.0 - a * a;
                }
                ws.deltas[l - 1] = back;
            }
        }
        0.5 * err * err
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use alloc::vec;

    /// Straightforward matrix-by-matrix forward pass used as a second route.
    fn reference_forward(sizes: &[usize], params: &[f64], input: &[f64]) -> f64 {
        let mut x = input.to_vec();
        let mut off = 0;
        for l in 0..sizes.len() - 1 {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let mut y = vec![0.0; n_out];
            for (j, yj) in y.iter_mut().enumerate() {
                let mut z = params[off + n_in * n_out + j];
                for i in 0..n_in {
                    z += params[off + j * n_in + i] * x[i];
                }
                *yj = if l + 2 < sizes.len() { libm::tanh(z) } else { z };
            }
            off += n_in * n_out + n_out;
            x = y;
        }
        x[0]
    }

    #[test]
    fn zero_network_predicts_zero_and_picks_first_action() {
        let net = QApproximator::zeros(4, 5, &QApproximator::DEFAULT_HIDDEN);
        assert_eq!(net.predict_q(&[1.0, -2.0, 3.0, 0.5], 3).unwrap(), 0.0);
        assert_eq!(net.greedy_action(&[0.3, 0.3, 0.3, 0.3]).unwrap(), 0);
        assert_eq!(net.sizes(), &[9, 32, 32, 16, 1]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = QApproximator::zeros(4, 5, &[8]);
        assert!(matches!(net.predict_q(&[1.0], 0), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(net.predict_q(&[0.0; 4], 5), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn forward_matches_reference_and_is_deterministic() {
        let mut rng = stream(9, Stream::WeightInit, 0);
        for _ in 0..10 {
            let net = QApproximator::random(3, 4, &[5, 6, 3], 0.8, &mut rng);
            let state: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for a in 0..4 {
                let q = net.predict_q(&state, a).unwrap();
                let mut input = state.clone();
                input.extend((0..4).map(|k| if k == a { 1.0 } else { 0.0 }));
                let r = reference_forward(net.sizes(), net.params(), &input);
                assert!((q - r).abs() <= 1e-12, "{q} vs {r}");
                assert_eq!(q.to_bits(), net.predict_q(&state, a).unwrap().to_bits());
            }
        }
    }

    #[test]
    fn crafted_network_prefers_action_two() {
        // No hidden layers: Q = w.x + b, so the action weights are the Q-values.
        let mut params = vec![0.0; 2 + 4 + 1];
        params[2 + 2] = 5.0;
        params[2 + 1] = 1.0;
        let net = QApproximator::from_params(2, 4, &[], params).unwrap();
        assert_eq!(net.greedy_action(&[0.7, -0.2]).unwrap(), 2);
    }

    #[test]
    fn greedy_matches_exhaustive_search() {
        let mut rng = stream(4, Stream::WeightInit, 1);
        for _ in 0..20 {
            let net = QApproximator::random(4, 5, &[8, 8, 4], 1.0, &mut rng);
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut best = (0, f64::NEG_INFINITY);
            for a in 0..5 {
                let q = net.predict_q(&s, a).unwrap();
                if q > best.1 {
                    best = (a, q);
                }
            }
            assert_eq!(net.greedy_action(&s).unwrap(), best.0);
        }
    }

    #[test]
    fn greedy_is_invariant_to_output_shift() {
        let mut rng = stream(5, Stream::WeightInit, 2);
        for _ in 0..20 {
            let mut net = QApproximator::random(4, 5, &[8, 8, 4], 1.0, &mut rng);
            let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let before = net.greedy_action(&s).unwrap();
            *net.output_bias_mut() += 3.25;
            assert_eq!(net.greedy_action(&s).unwrap(), before);
        }
    }
}
