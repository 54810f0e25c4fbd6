//! Text dumps of learners and agents for resuming between drops.
//!
//! A dump is a versioned header followed by labelled rows. Floats are written
//! with shortest round-trip formatting, so a load reproduces the exact state
//! (weights, RPROP steps, normalization ranges, the whole batch and the
//! exploration stream position).

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cellpower_core::agent::{Agent, AgentConfig};
use cellpower_core::qlearn::{
    FeatureScaler, GrowingBatch, LearnerConfig, QApproximator, QLearner, RpropState, Transition,
};
use cellpower_core::rng::SimRng;

use crate::Error;

pub const LEARNER_HEADER: &str = "cellpower-learner v1";
pub const AGENTS_HEADER: &str = "cellpower-agents v1";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PersistError {
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("unexpected end of dump")]
    Truncated,
}

fn push_row(out: &mut String, label: &str, values: impl IntoIterator<Item = impl std::fmt::Display>) {
    out.push_str(label);
    for v in values {
        write!(out, " {v}").expect("writing to a String");
    }
    out.push('\n');
}

fn write_scaler(out: &mut String, label: &str, s: &FeatureScaler) {
    push_row(out, label, [s.min.len()]);
    push_row(out, "min", &s.min);
    push_row(out, "max", &s.max);
}

pub fn write_learner(out: &mut String, l: &QLearner) {
    out.push_str(LEARNER_HEADER);
    out.push('\n');
    push_row(out, "dims", [l.net.state_dim(), l.net.num_actions()]);
    push_row(out, "hidden", l.net.hidden());
    push_row(out, "rounds", [l.rounds]);
    push_row(out, "reward_range", [l.reward_range.0, l.reward_range.1]);
    write_scaler(out, "scaler", &l.scaler);
    write_scaler(out, "policy_scaler", &l.policy_scaler);
    push_row(out, "params", l.net.params());
    push_row(out, "rprop_deltas", &l.rprop.deltas);
    push_row(out, "rprop_signs", &l.rprop.prev_sign);
    push_row(out, "batch", [l.batch.len()]);
    for t in l.batch.iter() {
        let mut row = format!("{} {}", t.action, t.reward);
        for v in t.state.iter().chain(&t.next_state) {
            write!(row, " {v}").expect("writing to a String");
        }
        push_row(out, "t", [row]);
    }
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self { lines: text.lines().enumerate(), line: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> PersistError {
        PersistError::Format { line: self.line, msg: msg.into() }
    }

    fn raw(&mut self) -> Result<&'a str, PersistError> {
        let (i, l) = self.lines.next().ok_or(PersistError::Truncated)?;
        self.line = i + 1;
        Ok(l)
    }

    fn header(&mut self, expected: &str) -> Result<(), PersistError> {
        let got = self.raw()?;
        if got != expected {
            return Err(self.err(format!("expected header `{expected}`, found `{got}`")));
        }
        Ok(())
    }

    fn row<T: FromStr>(&mut self, label: &str) -> Result<Vec<T>, PersistError> {
        let l = self.raw()?;
        let mut fields = l.split(' ');
        if fields.next() != Some(label) {
            return Err(self.err(format!("expected `{label}` row")));
        }
        fields.map(|f| f.parse().map_err(|_| self.err(format!("bad value `{f}` in `{label}` row")))).collect()
    }

    fn fixed<T: FromStr + Copy, const N: usize>(&mut self, label: &str) -> Result<[T; N], PersistError> {
        let v = self.row::<T>(label)?;
        v.try_into().map_err(|_| self.err(format!("`{label}` needs {N} values")))
    }

    fn scaler(&mut self, label: &str) -> Result<FeatureScaler, PersistError> {
        let [n] = self.fixed::<usize, 1>(label)?;
        let min = self.row("min")?;
        let max = self.row("max")?;
        if min.len() != n || max.len() != n {
            return Err(self.err(format!("`{label}` ranges need {n} values")));
        }
        Ok(FeatureScaler { min, max })
    }
}

fn read_learner_from(r: &mut Reader<'_>, config: LearnerConfig) -> Result<QLearner, PersistError> {
    r.header(LEARNER_HEADER)?;
    let [state_dim, num_actions] = r.fixed::<usize, 2>("dims")?;
    let hidden: Vec<usize> = r.row("hidden")?;
    if hidden != config.hidden {
        return Err(r.err(format!("hidden layers {hidden:?} differ from the configured {:?}", config.hidden)));
    }
    let [rounds] = r.fixed::<usize, 1>("rounds")?;
    let [lo, hi] = r.fixed::<f64, 2>("reward_range")?;
    let scaler = r.scaler("scaler")?;
    let policy_scaler = r.scaler("policy_scaler")?;
    let params = r.row("params")?;
    let net = QApproximator::from_params(state_dim, num_actions, &hidden, params).map_err(|e| r.err(e.to_string()))?;
    let deltas: Vec<f64> = r.row("rprop_deltas")?;
    let prev_sign: Vec<i8> = r.row("rprop_signs")?;
    if deltas.len() != net.num_params() || prev_sign.len() != net.num_params() {
        return Err(r.err("RPROP state does not match the network size"));
    }
    let mut rprop = RpropState::new(net.num_params(), config.rprop);
    rprop.deltas = deltas;
    rprop.prev_sign = prev_sign;
    let [n] = r.fixed::<usize, 1>("batch")?;
    let mut batch = GrowingBatch::new();
    for _ in 0..n {
        let l = r.raw()?;
        let fields: Vec<&str> = l.split(' ').collect();
        if fields.first() != Some(&"t") || fields.len() != 3 + 2 * state_dim {
            return Err(r.err("malformed transition row"));
        }
        let action = fields[1].parse().map_err(|_| r.err("bad action"))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| r.err(format!("bad value `{s}`")));
        let reward = num(fields[2])?;
        let values = fields[3..].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
        let (state, next_state) = values.split_at(state_dim);
        let t = Transition { state: state.to_vec(), action, reward, next_state: next_state.to_vec() };
        batch.push(t).map_err(|e| r.err(e.to_string()))?;
    }
    config.validate().map_err(|e| r.err(e.to_string()))?;
    Ok(QLearner { config, net, rprop, batch, scaler, policy_scaler, reward_range: (lo, hi), rounds })
}

pub fn read_learner(text: &str, config: LearnerConfig) -> Result<QLearner, PersistError> {
    read_learner_from(&mut Reader::new(text), config)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(s.get(2 * i..2 * i + 2)?, 16).ok()?;
    }
    Some(out)
}

/// Agents between drops: counters, exploration stream and learner.
pub fn write_agents(agents: &[Agent]) -> String {
    let mut out = format!("{AGENTS_HEADER}\nagents {}\n", agents.len());
    for a in agents {
        push_row(&mut out, "agent", [a.cell as u64, a.action_count, a.samples_since_update as u64]);
        let rng = format!("{} {} {}", hex(&a.rng.get_seed()), a.rng.get_stream(), a.rng.get_word_pos());
        push_row(&mut out, "rng", [rng]);
        write_learner(&mut out, &a.learner);
    }
    out
}

pub fn read_agents(text: &str, config: &AgentConfig) -> Result<Vec<Agent>, PersistError> {
    let mut r = Reader::new(text);
    r.header(AGENTS_HEADER)?;
    let [n] = r.fixed::<usize, 1>("agents")?;
    let mut agents = Vec::with_capacity(n);
    for _ in 0..n {
        let [cell, action_count, since] = r.fixed::<u64, 3>("agent")?;
        let fields: Vec<String> = r.row("rng")?;
        let rng = match fields.as_slice() {
            [seed, stream, pos] => {
                let seed = unhex(seed).ok_or_else(|| r.err("bad rng seed"))?;
                let stream: u64 = stream.parse().map_err(|_| r.err("bad rng stream"))?;
                let pos: u128 = pos.parse().map_err(|_| r.err("bad rng position"))?;
                let mut rng = ChaCha8Rng::from_seed(seed);
                rng.set_stream(stream);
                rng.set_word_pos(pos);
                rng
            }
            _ => return Err(r.err("`rng` needs seed, stream and position")),
        };
        let learner = read_learner_from(&mut r, config.learner.clone())?;
        if learner.net.state_dim() != config.features.dim() || learner.net.num_actions() != config.actions.len() {
            return Err(r.err("learner dimensions do not match the agent configuration"));
        }
        let mut agent = Agent::new(cell as usize, config.clone(), &mut SimRng::seed_from_u64(0), rng)
            .map_err(|e| r.err(e.to_string()))?;
        agent.learner = learner;
        agent.action_count = action_count;
        agent.samples_since_update = since as usize;
        agents.push(agent);
    }
    Ok(agents)
}

pub fn save_agents(path: &Path, agents: &[Agent]) -> Result<(), Error> {
    crate::export::write_file(path, &write_agents(agents))
}

pub fn load_agents(path: &Path, config: &AgentConfig) -> Result<Vec<Agent>, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    read_agents(&text, config).map_err(|source| Error::Persist { path: path.into(), source })
}
