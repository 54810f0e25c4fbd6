//! Scenario orchestration: the TTI loop, drops, training and evaluation
//! phases, the paired fixed-power baseline and the gain metrics.

use alloc::string::String;
use alloc::vec::Vec;

use crate::agent::{extract_state, Agent, AgentConfig, Coordinator, MeasurementWindow, Phase};
use crate::error::{Error, Result};
use crate::math;
use crate::netmodel::{self, CellRadio, ChannelModel, DropGeometry, Layout, MeasurementSample, Network, PowerVector};
use crate::oracle::RATE_UNIT_BPS;
use crate::reward::{network_reward, RewardConfig};
use crate::rng::{self, Stream};
use crate::traffic::{BufferMark, TrafficConfig, UserBuffer};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub layout: Layout,
    pub inter_site_distance_m: f64,
    /// Relative load per cell; the number of cells is its length.
    pub loads: Vec<f64>,
    /// Users generated in every drop.
    pub num_users_total: usize,
    pub traffic: TrafficConfig,
    pub reward: RewardConfig,
    pub agent: AgentConfig,
    pub action_period_ms: u64,
    pub tti_ms: u64,
    pub bandwidth_hz: f64,
    pub default_power_dbm: f64,
    pub noise_figure_db: f64,
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    pub shadowing_sigma_db: f64,
    pub training_s: f64,
    pub eval_s: f64,
    pub num_drops: usize,
    /// Leading drops used for training; the rest evaluate. Defaults to the
    /// first half.
    pub train_drops: Option<usize>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let channel = ChannelModel::macro_cell(10e6, 9.0);
        Self {
            name: "default".into(),
            layout: Layout::Triangle,
            inter_site_distance_m: 500.0,
            loads: alloc::vec![0.1, 0.2, 0.7],
            num_users_total: 30,
            traffic: TrafficConfig::full_buffer(),
            reward: RewardConfig::default(),
            agent: AgentConfig::default(),
            action_period_ms: 100,
            tti_ms: 1,
            bandwidth_hz: 10e6,
            default_power_dbm: 46.0,
            noise_figure_db: 9.0,
            pathloss_intercept_db: channel.pathloss_intercept_db,
            pathloss_slope_db: channel.pathloss_slope_db_per_decade,
            shadowing_sigma_db: channel.shadowing_sigma_db,
            training_s: 60.0,
            eval_s: 20.0,
            num_drops: 30,
            train_drops: None,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn num_cells(&self) -> usize {
        self.loads.len()
    }

    pub fn users_per_cell(&self) -> Vec<usize> {
        netmodel::users_per_cell(self.num_users_total, &self.loads)
    }

    pub fn train_drop_count(&self) -> usize {
        self.train_drops.unwrap_or(self.num_drops.div_ceil(2))
    }

    pub fn phase_of(&self, drop_index: usize) -> Phase {
        if drop_index < self.train_drop_count() {
            Phase::Train
        } else {
            Phase::Eval
        }
    }

    pub fn duration_s(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Train => self.training_s,
            Phase::Eval => self.eval_s,
        }
    }

    pub fn channel(&self) -> ChannelModel {
        ChannelModel {
            pathloss_intercept_db: self.pathloss_intercept_db,
            pathloss_slope_db_per_decade: self.pathloss_slope_db,
            shadowing_sigma_db: self.shadowing_sigma_db,
            noise_power_w: netmodel::thermal_noise_w(self.bandwidth_hz, self.noise_figure_db),
        }
    }

    pub fn radio(&self) -> CellRadio {
        CellRadio {
            bandwidth_hz: self.bandwidth_hz,
            default_power_dbm: self.default_power_dbm,
            min_power_dbm: self.agent.min_power_dbm,
            max_power_dbm: self.agent.max_power_dbm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.loads.is_empty() || self.loads.iter().any(|l| !(*l > 0.0)) {
            return bad("loads must be positive, one per cell");
        }
        if (self.loads.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return bad("loads must sum to 1");
        }
        if self.users_per_cell().contains(&0) {
            return bad("every cell needs at least one user per drop");
        }
        if self.tti_ms == 0 || self.action_period_ms == 0 || !self.action_period_ms.is_multiple_of(self.tti_ms) {
            return bad("action period must be a positive multiple of the TTI");
        }
        for d in [self.training_s, self.eval_s] {
            if !(d > 0.0) || !d.is_finite() {
                return bad("drop durations must be positive");
            }
            let ms = math::round(d * 1000.0) as u64;
            if !ms.is_multiple_of(self.tti_ms) {
                return bad("drop durations must be whole TTIs");
            }
        }
        if !(self.inter_site_distance_m > 0.0) {
            return bad("inter-site distance must be positive");
        }
        if !(self.agent.min_power_dbm <= self.default_power_dbm && self.default_power_dbm <= self.agent.max_power_dbm) {
            return bad("default power must lie within the power bounds");
        }
        if self.num_drops == 0 || self.train_drop_count() > self.num_drops {
            return bad("train drops must not exceed the number of drops");
        }
        if let Some(r) = self.reward.neighbor_radius_m {
            if !(r >= 0.0) {
                return bad("neighbor radius must be non-negative");
            }
        }
        self.traffic.validate()?;
        self.reward.validate()?;
        self.agent.validate()?;
        self.channel().validate()?;
        DropGeometry {
            layout: self.layout,
            inter_site_distance_m: self.inter_site_distance_m,
            users_per_cell: self.users_per_cell(),
        }
        .cell_positions()?;
        Ok(())
    }

    /// The environment realization of a drop; identical for learned and
    /// baseline runs.
    pub fn generate_network(&self, drop_index: usize) -> Result<Network> {
        let seed = rng::derive_seed(self.seed, Stream::Drop, drop_index as u64);
        let geometry = DropGeometry {
            layout: self.layout,
            inter_site_distance_m: self.inter_site_distance_m,
            users_per_cell: self.users_per_cell(),
        };
        Network::generate(
            &geometry,
            self.radio(),
            self.channel(),
            &mut rng::stream(seed, Stream::Placement, 0),
            &mut rng::stream(seed, Stream::Shadowing, 0),
        )
    }

    /// One agent per cell with its own weight-init and exploration streams.
    pub fn build_agents(&self) -> Result<Vec<Agent>> {
        self.validate()?;
        (0..self.num_cells())
            .map(|c| {
                Agent::new(
                    c,
                    self.agent.clone(),
                    &mut rng::stream(self.seed, Stream::WeightInit, c as u64),
                    rng::stream(self.seed, Stream::Exploration, c as u64),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerSample {
    pub time_ms: u64,
    pub powers_dbm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub time_ms: u64,
    pub agent: usize,
    pub epsilon: f64,
    pub delta_db: f64,
    pub power_dbm: f64,
    /// Network reward of the window closed by this action.
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    pub sorted: Vec<f64>,
    pub percentiles: Percentiles,
}

impl Cdf {
    /// Linear interpolation between order statistics at rank `q (n - 1)`.
    pub fn percentile(&self, q: f64) -> f64 {
        percentile_sorted(&self.sorted, q)
    }

    /// Fraction of values `<= x`.
    pub fn at(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = math::floor(rank) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn compute_cdf(values: &[f64]) -> Result<Cdf> {
    if values.is_empty() {
        return Err(Error::EmptyInput("CDF values"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(alloc::format!("CDF value {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let percentiles = Percentiles {
        p5: percentile_sorted(&sorted, 0.05),
        p50: percentile_sorted(&sorted, 0.5),
        p95: percentile_sorted(&sorted, 0.95),
    };
    Ok(Cdf { sorted, percentiles })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub index: usize,
    pub phase: Phase,
    pub learned: bool,
    pub duration_ms: u64,
    pub user_cell: Vec<usize>,
    /// Average throughput of each user over the drop, bits/s.
    pub user_throughput_bps: Vec<f64>,
    /// Powers at the start and after every action epoch.
    pub power_trace: Vec<PowerSample>,
    pub reward_trace: Vec<(u64, f64)>,
    pub actions: Vec<ActionRecord>,
    /// Time average of the linear power of each cell, in dBm.
    pub mean_power_dbm: Vec<f64>,
    pub network_tput_bps: f64,
    pub percentiles: Percentiles,
    pub training_rounds: usize,
}

impl DropResult {
    /// Mean of the per-cell power traces over `[from_ms, to_ms)`, in dBm,
    /// treating each trace entry as held until the next.
    pub fn time_averaged_power_dbm(&self, from_ms: u64, to_ms: u64) -> Result<Vec<f64>> {
        if from_ms >= to_ms || self.power_trace.is_empty() {
            return Err(Error::EmptyInput("power averaging window"));
        }
        let c = self.power_trace[0].powers_dbm.len();
        let mut acc = alloc::vec![0.0; c];
        for (i, s) in self.power_trace.iter().enumerate() {
            let start = s.time_ms.max(from_ms);
            let end = self.power_trace.get(i + 1).map_or(self.duration_ms, |n| n.time_ms).min(to_ms);
            if end > start {
                for (a, p) in acc.iter_mut().zip(&s.powers_dbm) {
                    *a += p * (end - start) as f64;
                }
            }
        }
        let span = (to_ms.min(self.duration_ms) - from_ms) as f64;
        Ok(acc.into_iter().map(|a| a / span).collect())
    }
}

/// How cell powers are chosen during a drop.
pub enum Controller<'a> {
    Learning(&'a mut [Agent]),
    /// Fixed powers in dBm, e.g. the 46 dBm baseline.
    Fixed(&'a [f64]),
}

/// Per-user spectral efficiency and per-cell measurements at given powers.
struct RadioState {
    spectral_eff: Vec<f64>,
    samples: Vec<MeasurementSample>,
}

impl RadioState {
    fn new(network: &Network, powers: &PowerVector) -> Result<Self> {
        let spectral_eff = network.sinrs(powers).into_iter().map(|s| math::ln_1p(s) / math::LN_2).collect();
        let samples = network
            .cells
            .iter()
            .map(|c| netmodel::cell_measurements(c, &network.users, powers))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spectral_eff, samples })
    }
}

fn window_rewards(
    config: &ScenarioConfig,
    network: &Network,
    buffers: &[UserBuffer],
    marks: &[BufferMark],
    window_s: f64,
    agent_cell: usize,
) -> Result<(f64, f64)> {
    let floor = config.traffic.rate_floor_bps;
    let origin = network.cells[agent_cell].position;
    let mut per_cell: Vec<Vec<f64>> = alloc::vec![Vec::new(); network.num_cells()];
    for (u, (b, m)) in network.users.iter().zip(buffers.iter().zip(marks)) {
        let tput = b.throughput_since(m, window_s, &config.traffic).max(floor) / RATE_UNIT_BPS;
        per_cell[u.serving_cell].push(tput);
    }
    let cell_reward = config.reward.evaluate(&per_cell[agent_cell])?;
    if let Some(radius) = config.reward.neighbor_radius_m {
        for (c, list) in per_cell.iter_mut().enumerate() {
            if network.cells[c].position.distance(&origin) > radius {
                list.clear();
            }
        }
    }
    let reward = network_reward(&per_cell, &config.reward)?;
    Ok((reward, cell_reward))
}

pub fn run_drop(
    config: &ScenarioConfig,
    drop_index: usize,
    phase: Phase,
    controller: Controller<'_>,
) -> Result<DropResult> {
    config.validate()?;
    let network = config.generate_network(drop_index)?;
    let c = network.num_cells();
    let drop_seed = rng::derive_seed(config.seed, Stream::Drop, drop_index as u64);
    let mut traffic_rngs: Vec<_> =
        (0..network.users.len()).map(|u| rng::stream(drop_seed, Stream::Traffic, u as u64)).collect();
    let mut buffers: Vec<UserBuffer> = traffic_rngs.iter_mut().map(|r| UserBuffer::new(&config.traffic, r)).collect();

    let (mut agents, mut powers_dbm): (Option<&mut [Agent]>, Vec<f64>) = match controller {
        Controller::Learning(agents) => {
            if agents.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: agents.len() });
            }
            agents.iter_mut().for_each(Agent::begin_drop);
            (Some(agents), alloc::vec![config.default_power_dbm; c])
        }
        Controller::Fixed(p) => {
            if p.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: p.len() });
            }
            let clamped = p.iter().zip(&network.cells).map(|(d, cell)| cell.clamp_power(*d)).collect();
            (None, clamped)
        }
    };
    let learned = agents.is_some();

    let duration_ms = math::round(config.duration_s(phase) * 1000.0) as u64;
    let tti_s = config.tti_ms as f64 / 1000.0;
    let mut coordinator = Coordinator::round_robin(c, config.action_period_ms);
    let mut windows: Vec<MeasurementWindow> = alloc::vec![MeasurementWindow::default(); c];
    let mut marks: Vec<Vec<BufferMark>> = alloc::vec![buffers.iter().map(UserBuffer::mark).collect(); c];
    let mut mark_ms = alloc::vec![0u64; c];
    let mut power_trace = alloc::vec![PowerSample { time_ms: 0, powers_dbm: powers_dbm.clone() }];
    let mut reward_trace = Vec::new();
    let mut actions = Vec::new();
    let mut training_rounds = 0;
    let mut power_acc_w = alloc::vec![0.0; c];

    let mut powers = PowerVector::from_dbm(&powers_dbm);
    let mut radio = RadioState::new(&network, &powers)?;
    let mut backlogged = alloc::vec![0usize; c];

    let mut t_ms = 0u64;
    while t_ms < duration_ms {
        let now_s = t_ms as f64 / 1000.0;
        for b in buffers.iter_mut() {
            b.poll_arrival(&config.traffic, now_s);
        }
        backlogged.iter_mut().for_each(|n| *n = 0);
        for (u, b) in network.users.iter().zip(&buffers) {
            if b.is_backlogged() {
                backlogged[u.serving_cell] += 1;
            }
        }
        for (i, (u, b)) in network.users.iter().zip(buffers.iter_mut()).enumerate() {
            let served = if b.is_backlogged() {
                let share = network.cells[u.serving_cell].bandwidth_hz / backlogged[u.serving_cell] as f64;
                (radio.spectral_eff[i] * share * tti_s / 8.0).min(b.backlog_bytes)
            } else {
                0.0
            };
            b.step_traffic(&config.traffic, now_s, tti_s, served, &mut traffic_rngs[i])?;
        }
        for (w, s) in windows.iter_mut().zip(&radio.samples) {
            w.push(s);
        }
        for (acc, p) in power_acc_w.iter_mut().zip(powers.as_slice()) {
            *acc += p;
        }
        t_ms += config.tti_ms;

        let Some(agents) = agents.as_deref_mut() else {
            if t_ms.is_multiple_of(config.action_period_ms) && t_ms < duration_ms {
                power_trace.push(PowerSample { time_ms: t_ms, powers_dbm: powers_dbm.clone() });
            }
            continue;
        };
        let Some(a) = coordinator.agent_turn(t_ms) else { continue };
        let window_s = (t_ms - mark_ms[a]) as f64 / 1000.0;
        let (reward, cell_reward) = window_rewards(config, &network, &buffers, &marks[a], window_s, a)?;
        if !reward.is_finite() || !cell_reward.is_finite() {
            return Err(Error::NonFinite(alloc::format!(
                "reward {reward}, cell reward {cell_reward} in drop {drop_index} at {t_ms} ms for agent {a} with powers {powers_dbm:?}"
            )));
        }
        let state = extract_state(&windows[a], powers_dbm[a], cell_reward, &agents[a].config.features, a)?;
        if !state.is_finite() {
            return Err(Error::NonFinite(alloc::format!("state {state:?} in drop {drop_index} at {t_ms} ms")));
        }
        let out = agents[a].agent_step(&state, reward, powers_dbm[a], phase)?;
        if let Some(report) = &out.retrained {
            training_rounds += 1;
            if !report.completed {
                return Err(Error::NonFinite(alloc::format!(
                    "training diverged for agent {a} in drop {drop_index} at {t_ms} ms"
                )));
            }
        }
        windows[a].clear();
        marks[a] = buffers.iter().map(UserBuffer::mark).collect();
        mark_ms[a] = t_ms;
        if out.power_dbm != powers_dbm[a] {
            powers_dbm[a] = out.power_dbm;
            powers = PowerVector::from_dbm(&powers_dbm);
            radio = RadioState::new(&network, &powers)?;
        }
        reward_trace.push((t_ms, reward));
        actions.push(ActionRecord {
            time_ms: t_ms,
            agent: a,
            epsilon: out.epsilon,
            delta_db: out.delta_db,
            power_dbm: out.power_dbm,
            reward,
        });
        if t_ms < duration_ms {
            power_trace.push(PowerSample { time_ms: t_ms, powers_dbm: powers_dbm.clone() });
        }
    }

    let duration_s = duration_ms as f64 / 1000.0;
    let user_throughput_bps: Vec<f64> =
        buffers.iter().map(|b| b.throughput_since(&BufferMark::default(), duration_s, &config.traffic)).collect();
    let network_tput_bps = buffers.iter().map(|b| 8.0 * b.bytes_served_total).sum::<f64>() / duration_s;
    let ttis = (duration_ms / config.tti_ms) as f64;
    let mean_power_dbm = power_acc_w.iter().map(|w| math::watts_to_dbm(w / ttis)).collect();
    let percentiles = compute_cdf(&user_throughput_bps)?.percentiles;
    Ok(DropResult {
        index: drop_index,
        phase,
        learned,
        duration_ms,
        user_cell: network.users.iter().map(|u| u.serving_cell).collect(),
        user_throughput_bps,
        power_trace,
        reward_trace,
        actions,
        mean_power_dbm,
        network_tput_bps,
        percentiles,
        training_rounds,
    })
}

/// Learned-versus-baseline gains over paired drops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSummary {
    /// Relative change of the pooled 5th-percentile user throughput.
    pub p5_gain: f64,
    pub median_gain: f64,
    /// Baseline minus learned mean power, dB.
    pub power_reduction_db: f64,
    /// Linear saving implied by the reduction, `1 - 10^(-dB/10)`.
    pub power_saving: f64,
    /// Relative change of the total network throughput.
    pub network_tput_change: f64,
}

pub fn power_saving(reduction_db: f64) -> f64 {
    1.0 - math::db_to_linear(-reduction_db)
}

fn pooled_mean_power_w(drops: &[DropResult]) -> f64 {
    let all: Vec<f64> = drops.iter().flat_map(|d| d.mean_power_dbm.iter().map(|p| math::dbm_to_watts(*p))).collect();
    math::mean(&all)
}

pub fn gain_summary(learned: &[DropResult], baseline: &[DropResult]) -> Result<GainSummary> {
    if learned.is_empty() || baseline.is_empty() {
        return Err(Error::EmptyInput("gain summary needs drops"));
    }
    let pool = |ds: &[DropResult]| ds.iter().flat_map(|d| d.user_throughput_bps.iter().copied()).collect::<Vec<_>>();
    let l = compute_cdf(&pool(learned))?.percentiles;
    let b = compute_cdf(&pool(baseline))?.percentiles;
    let reduction = math::linear_to_db(pooled_mean_power_w(baseline) / pooled_mean_power_w(learned));
    let tput = |ds: &[DropResult]| ds.iter().map(|d| d.network_tput_bps).sum::<f64>();
    let summary = GainSummary {
        p5_gain: l.p5 / b.p5 - 1.0,
        median_gain: l.p50 / b.p50 - 1.0,
        power_reduction_db: reduction,
        power_saving: power_saving(reduction),
        network_tput_change: tput(learned) / tput(baseline) - 1.0,
    };
    let values = [summary.p5_gain, summary.median_gain, summary.power_reduction_db, summary.network_tput_change];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(alloc::format!("gain summary {summary:?}")));
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ScenarioConfig,
    pub learned: Vec<DropResult>,
    /// Fixed default-power runs on the same drops.
    pub baseline: Vec<DropResult>,
    /// Gains over the evaluation drops; `None` without any.
    pub summary: Option<GainSummary>,
    pub agents: Vec<Agent>,
}

impl ExperimentReport {
    pub fn eval_drops(&self) -> (Vec<DropResult>, Vec<DropResult>) {
        let pick = |ds: &[DropResult]| ds.iter().filter(|d| d.phase == Phase::Eval).cloned().collect();
        (pick(&self.learned), pick(&self.baseline))
    }
}

pub fn run_experiment(config: &ScenarioConfig) -> Result<ExperimentReport> {
    let mut agents = config.build_agents()?;
    let fixed = alloc::vec![config.default_power_dbm; config.num_cells()];
    let mut learned = Vec::with_capacity(config.num_drops);
    let mut baseline = Vec::with_capacity(config.num_drops);
    for d in 0..config.num_drops {
        let phase = config.phase_of(d);
        learned.push(run_drop(config, d, phase, Controller::Learning(&mut agents))?);
        baseline.push(run_drop(config, d, phase, Controller::Fixed(&fixed))?);
    }
    let mut report = ExperimentReport { config: config.clone(), learned, baseline, summary: None, agents };
    let (l, b) = report.eval_drops();
    if !l.is_empty() {
        report.summary = Some(gain_summary(&l, &b)?);
    }
    Ok(report)
}

/// Runs only the fixed-power baseline over every drop.
pub fn run_baseline(config: &ScenarioConfig) -> Result<Vec<DropResult>> {
    config.validate()?;
    let fixed = alloc::vec![config.default_power_dbm; config.num_cells()];
    (0..config.num_drops).map(|d| run_drop(config, d, config.phase_of(d), Controller::Fixed(&fixed))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlearn::LearnerConfig;
    use crate::traffic::TrafficConfig;
    use alloc::vec;

    fn small(cells: usize, users: usize, seconds: f64) -> ScenarioConfig {
        ScenarioConfig {
            loads: vec![1.0 / cells as f64; cells],
            num_users_total: users,
            training_s: seconds,
            eval_s: seconds,
            num_drops: 2,
            agent: AgentConfig {
                learner: LearnerConfig { hidden: vec![8], epochs_per_round: 5, ..Default::default() },
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn action_count_matches_duration_over_period() {
        let cfg = small(2, 10, 60.0);
        let mut agents = cfg.build_agents().unwrap();
        let r = run_drop(&cfg, 0, Phase::Train, Controller::Learning(&mut agents)).unwrap();
        assert_eq!(r.actions.len(), 600);
        assert_eq!(r.actions.iter().filter(|a| a.agent == 0).count(), 300);
        for a in &r.actions {
            assert!((10.0..=46.0).contains(&a.power_dbm));
        }
    }

    #[test]
    fn eval_drop_pins_epsilon() {
        let cfg = small(2, 6, 5.0);
        let mut agents = cfg.build_agents().unwrap();
        let r = run_drop(&cfg, 1, Phase::Eval, Controller::Learning(&mut agents)).unwrap();
        let first_turns = r.actions.iter().filter(|a| a.epsilon == 1.0).count();
        assert_eq!(first_turns, 2);
        assert!(r.actions.iter().all(|a| a.epsilon == 1.0 || a.epsilon == 0.1));
    }

    #[test]
    fn fixed_power_rates_match_analytic_values() {
        let cfg = small(3, 12, 1.0);
        let r = run_drop(&cfg, 0, Phase::Train, Controller::Fixed(&[46.0; 3])).unwrap();
        let net = cfg.generate_network(0).unwrap();
        let expect = net.steady_state_rates(&PowerVector::from_dbm(&[46.0; 3]));
        for (a, b) in r.user_throughput_bps.iter().zip(&expect) {
            assert!((a / b - 1.0).abs() < 1e-9, "{a} vs {b}");
        }
        let total: f64 = expect.iter().sum();
        assert!((r.network_tput_bps / total - 1.0).abs() < 1e-9);
        assert!(r.actions.is_empty());
        assert!((r.mean_power_dbm[0] - 46.0).abs() < 1e-9);
    }

    #[test]
    fn powers_change_only_at_own_action_epochs() {
        let cfg = small(3, 9, 3.0);
        let mut agents = cfg.build_agents().unwrap();
        let r = run_drop(&cfg, 0, Phase::Eval, Controller::Learning(&mut agents)).unwrap();
        for (w, act) in r.power_trace.windows(2).zip(&r.actions) {
            assert_eq!(w[1].time_ms, act.time_ms);
            for cell in 0..3 {
                if cell != act.agent {
                    assert_eq!(w[0].powers_dbm[cell], w[1].powers_dbm[cell]);
                }
            }
            assert_eq!(w[1].powers_dbm[act.agent], act.power_dbm);
        }
    }

    #[test]
    fn same_seed_same_results() {
        let cfg = small(2, 6, 2.0);
        let run = || {
            let mut agents = cfg.build_agents().unwrap();
            run_drop(&cfg, 0, Phase::Train, Controller::Learning(&mut agents)).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bursty_drop_runs_and_serves_files() {
        let mut cfg = small(2, 6, 5.0);
        cfg.traffic = TrafficConfig::bursty(1e5, 0.1);
        let r = run_drop(&cfg, 0, Phase::Train, Controller::Fixed(&[46.0; 2])).unwrap();
        assert!(r.network_tput_bps > 0.0);
        assert!(r.user_throughput_bps.iter().all(|t| *t >= cfg.traffic.rate_floor_bps));
    }

    #[test]
    fn baseline_against_itself_has_zero_gain() {
        let cfg = small(3, 9, 1.0);
        let base = run_baseline(&cfg).unwrap();
        let g = gain_summary(&base, &base).unwrap();
        assert_eq!(
            g,
            GainSummary {
                p5_gain: 0.0,
                median_gain: 0.0,
                power_reduction_db: 0.0,
                power_saving: 0.0,
                network_tput_change: 0.0
            }
        );
    }

    #[test]
    fn power_saving_example() {
        assert!((power_saving(8.54) - 0.86).abs() < 0.001);
        assert_eq!(power_saving(0.0), 0.0);
    }

    #[test]
    fn thirty_users_split_by_load() {
        assert_eq!(ScenarioConfig::default().users_per_cell(), vec![3, 6, 21]);
        assert_eq!(ScenarioConfig::default().train_drop_count(), 15);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(compute_cdf(&[1.0, 2.0, 3.0, 4.0]).unwrap().percentiles.p50, 2.5);
        let c = compute_cdf(&[7.0; 5]).unwrap().percentiles;
        assert_eq!((c.p5, c.p50, c.p95), (7.0, 7.0, 7.0));
        assert!(compute_cdf(&[]).is_err());
        let cdf = compute_cdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(cdf.at(2.0), 2.0 / 3.0);
    }

    #[test]
    fn cdf_of_uniform_sample() {
        use rand::Rng;
        let mut rng = rng::stream(3, Stream::Drop, 0);
        let v: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
        let cdf = compute_cdf(&v).unwrap();
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // rank 4.95 between order statistics 4 and 5
        let reference = sorted[4] + 0.95 * (sorted[5] - sorted[4]);
        assert!((cdf.percentiles.p5 - reference).abs() < 1e-12);
        assert!((cdf.percentiles.p5 - 0.05).abs() < 0.05);
    }

    #[test]
    fn time_averaged_power_over_trace() {
        let r = DropResult {
            index: 0,
            phase: Phase::Train,
            learned: true,
            duration_ms: 400,
            user_cell: vec![],
            user_throughput_bps: vec![],
            power_trace: vec![
                PowerSample { time_ms: 0, powers_dbm: vec![46.0] },
                PowerSample { time_ms: 100, powers_dbm: vec![40.0] },
                PowerSample { time_ms: 300, powers_dbm: vec![30.0] },
            ],
            reward_trace: vec![],
            actions: vec![],
            mean_power_dbm: vec![],
            network_tput_bps: 0.0,
            percentiles: Percentiles { p5: 0.0, p50: 0.0, p95: 0.0 },
            training_rounds: 0,
        };
        assert_eq!(r.time_averaged_power_dbm(0, 400).unwrap(), vec![(46.0 + 80.0 + 30.0) / 4.0]);
        assert_eq!(r.time_averaged_power_dbm(200, 400).unwrap(), vec![35.0]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ScenarioConfig { loads: vec![0.5, 0.6], ..Default::default() },
            ScenarioConfig { num_users_total: 2, ..Default::default() },
            ScenarioConfig { training_s: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }
}
