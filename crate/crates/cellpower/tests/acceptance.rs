//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cellpower::export::export_results;
use cellpower_core::agent::{FeatureConfig, InterferenceFeature, Phase};
use cellpower_core::math;
use cellpower_core::netmodel::{CellRadio, ChannelModel, DropGeometry, Layout, Network};
use cellpower_core::oracle::{check_convexity, grid_search, solve_num, steady_state_reward, GridSpec, NumProblem};
use cellpower_core::qlearn::{
    batch_gradient, compute_targets, EpsilonSchedule, LearnerConfig, QApproximator, QLearner, Transition, Workspace,
};
use cellpower_core::reward::{
    alpha_fair, canonical_reward, network_reward, Aggregation, CanonicalReward, RewardConfig, WeightMode,
};
use cellpower_core::rng::{stream, Stream};
use cellpower_core::sim::{run_drop, run_experiment, Controller, ScenarioConfig};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Criterion 1: toy deterministic MDP against value iteration.

struct ToyMdp {
    next: [[usize; 2]; 4],
    reward: [[f64; 2]; 4],
}

fn value_iteration(mdp: &ToyMdp, gamma: f64) -> [[f64; 2]; 4] {
    let mut q = [[0.0f64; 2]; 4];
    for _ in 0..2000 {
        let v: Vec<f64> = q.iter().map(|row| row[0].max(row[1])).collect();
        for s in 0..4 {
            for a in 0..2 {
                q[s][a] = mdp.reward[s][a] + gamma * v[mdp.next[s][a]];
            }
        }
    }
    q
}

fn one_hot(s: usize) -> Vec<f64> {
    let mut v = vec![0.0; 4];
    v[s] = 1.0;
    v
}

fn toy_mdps() -> Vec<ToyMdp> {
    let mut out = vec![ToyMdp {
        // A ring where the far state pays most, reached by a low-paying move.
        next: [[1, 0], [2, 0], [3, 1], [3, 0]],
        reward: [[0.0, 0.2], [0.1, 0.3], [0.5, 0.0], [1.0, -0.5]],
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    while out.len() < 5 {
        let mut mdp = ToyMdp { next: [[0; 2]; 4], reward: [[0.0; 2]; 4] };
        for s in 0..4 {
            for a in 0..2 {
                mdp.next[s][a] = rng.gen_range(0..4);
                mdp.reward[s][a] = (rng.gen_range(-1.0f64..1.0) * 10.0).round() / 10.0;
            }
        }
        let q = value_iteration(&mdp, 0.7);
        // Keep instances whose optimal action is clear in every state.
        if q.iter().all(|row| (row[0] - row[1]).abs() > 0.05) {
            out.push(mdp);
        }
    }
    out
}

fn criterion_toy_mdp() -> Outcome {
    let gamma = 0.7;
    let mut details = Vec::new();
    for (k, mdp) in toy_mdps().iter().enumerate() {
        let q_star = value_iteration(mdp, gamma);
        let config = LearnerConfig { gamma, ..Default::default() };
        let mut learner =
            QLearner::new(4, 2, config, &mut stream(k as u64, Stream::WeightInit, 0)).map_err(|e| e.to_string())?;
        let mut rng = stream(k as u64, Stream::Exploration, 0);
        // Exhaustive exploration: every state-action pair, visited in
        // random order, several times over, with a round every 16 samples.
        let mut pairs: Vec<(usize, usize)> = (0..4).flat_map(|s| (0..2).map(move |a| (s, a))).collect();
        for sweep in 0..12 {
            for i in (1..pairs.len()).rev() {
                pairs.swap(i, rng.gen_range(0..=i));
            }
            for &(s, a) in &pairs {
                let t = Transition {
                    state: one_hot(s),
                    action: a,
                    reward: mdp.reward[s][a],
                    next_state: one_hot(mdp.next[s][a]),
                };
                learner.record(t).map_err(|e| e.to_string())?;
            }
            if sweep % 2 == 1 {
                learner.train_round().map_err(|e| e.to_string())?;
            }
        }
        for _ in 0..40 {
            learner.train_round().map_err(|e| e.to_string())?;
        }
        for (s, row) in q_star.iter().enumerate() {
            let optimal = usize::from(row[1] > row[0]);
            let greedy = learner.greedy_action(&one_hot(s)).map_err(|e| e.to_string())?;
            ensure(greedy == optimal, || {
                format!(
                    "mdp {k} state {s}: greedy {greedy}, optimal {optimal} (q* {row:?}, q {:?})",
                    learner.q_values(&one_hot(s))
                )
            })?;
        }
        details.push(format!("mdp {k} ok"));
    }
    Ok(format!("{} MDPs, greedy policy equals value iteration in every state", details.len()))
}

// Criterion 2: analytic loss gradient against central differences.

fn loss(net: &QApproximator, batch: &[Transition], targets: &[f64]) -> f64 {
    batch
        .iter()
        .zip(targets)
        .map(|(t, y)| {
            let e = y - net.predict_q(&t.state, t.action).unwrap();
            0.5 * e * e
        })
        .sum()
}

fn criterion_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let state_dim = rng.gen_range(1..=5);
        let actions = rng.gen_range(2..=5);
        let hidden: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(2..=8)).collect();
        let mut init = stream(k, Stream::WeightInit, 0);
        let mut net = QApproximator::random(state_dim, actions, &hidden, 0.8, &mut init);
        let batch: Vec<Transition> = (0..rng.gen_range(3..=10))
            .map(|_| Transition {
                state: (0..state_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                action: rng.gen_range(0..actions),
                reward: rng.gen_range(-1.0..1.0),
                next_state: (0..state_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            })
            .collect();
        let targets = compute_targets(&batch, &net, 0.7).map_err(|e| e.to_string())?;
        let mut grad = vec![0.0; net.num_params()];
        batch_gradient(&net, &batch, &targets, &mut grad, &mut Workspace::default());
        let h = 1e-6;
        let fd: Vec<f64> = (0..net.num_params())
            .map(|i| {
                let w = net.params()[i];
                net.params_mut()[i] = w + h;
                let up = loss(&net, &batch, &targets);
                net.params_mut()[i] = w - h;
                let down = loss(&net, &batch, &targets);
                net.params_mut()[i] = w;
                (up - down) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&grad).max(norm(&fd)).max(1e-300);
        worst = worst.max(rel);
        ensure(rel < 1e-5, || format!("net {k} ({hidden:?}): relative error {rel:e}"))?;
    }
    Ok(format!("20 nets, worst relative error {worst:.2e}"))
}

// Criteria 3 and 4: the transformed utility program.

fn radio() -> CellRadio {
    CellRadio { bandwidth_hz: 10e6, default_power_dbm: 46.0, min_power_dbm: 10.0, max_power_dbm: 46.0 }
}

fn random_network(cells: usize, users: Vec<usize>, seed: u64) -> Result<Network, String> {
    let layout = if cells == 2 { Layout::Line } else { Layout::Triangle };
    let geometry = DropGeometry { layout, inter_site_distance_m: 500.0, users_per_cell: users };
    Network::generate(
        &geometry,
        radio(),
        ChannelModel::macro_cell(10e6, 9.0),
        &mut stream(seed, Stream::Placement, 0),
        &mut stream(seed, Stream::Shadowing, 0),
    )
    .map_err(|e| e.to_string())
}

fn criterion_convexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut probes = 0;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..10u64 {
        let cells = rng.gen_range(2..=3);
        let users = (0..cells).map(|_| rng.gen_range(1..=6)).collect();
        let net = random_network(cells, users, 100 + k)?;
        let alpha = [1.0, 1.5, 2.0, 3.0][k as usize % 4];
        let problem = NumProblem::from_network(&net, alpha, 10.0, 46.0).map_err(|e| e.to_string())?;
        let report = check_convexity(&problem, 100, &mut stream(k, Stream::Drop, 7)).map_err(|e| e.to_string())?;
        probes += report.probes;
        worst =
            worst.max(report.max_constraint_gap).max(report.max_feasibility_violation).max(report.max_objective_gap);
        ensure(report.passed(), || format!("instance {k}: {report:?}"))?;
    }
    Ok(format!("{probes} probes on 10 instances, zero violations, worst defect {worst:.2e}"))
}

fn criterion_num_vs_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_db: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for k in 0..10u64 {
        let users = vec![rng.gen_range(1..=8), rng.gen_range(1..=8)];
        let net = random_network(2, users, 200 + k)?;
        let alpha = if k % 2 == 0 { 1.0 } else { 2.0 };
        let problem = NumProblem::from_network(&net, alpha, 10.0, 46.0).map_err(|e| e.to_string())?;
        let num = solve_num(&problem, 1e-6, 10_000).map_err(|e| e.to_string())?;
        ensure(num.converged, || {
            format!("instance {k}: residual {:e} after {} iterations", num.kkt_residual, num.iterations)
        })?;
        let reward = RewardConfig::alpha_fair(alpha, WeightMode::Unit);
        let grid = grid_search(&net, &[GridSpec::default(); 2], &reward, 1e-3).map_err(|e| e.to_string())?;
        for (a, b) in num.powers_dbm.iter().zip(&grid.best.powers_dbm) {
            worst_db = worst_db.max((a - b).abs());
        }
        let rel = (num.utility - grid.best.reward).abs() / grid.best.reward.abs();
        worst_rel = worst_rel.max(rel);
        ensure(num.powers_dbm.iter().zip(&grid.best.powers_dbm).all(|(a, b)| (a - b).abs() <= 1.0), || {
            format!("instance {k}: NUM {:?} vs grid {:?}", num.powers_dbm, grid.best.powers_dbm)
        })?;
        ensure(rel <= 0.005, || format!("instance {k}: utility {} vs grid {}", num.utility, grid.best.reward))?;
    }
    Ok(format!("10 instances, worst power gap {worst_db:.2} dB, worst objective gap {:.4}%", 100.0 * worst_rel))
}

// Criterion 5: two-cell convergence to the grid optimum.

const TWO_CELL_SEED: u64 = 1;
const ROBUSTNESS_SEEDS: u64 = 20;

fn two_cell(kind: CanonicalReward, seed: u64) -> ScenarioConfig {
    let mut config = ScenarioConfig {
        name: format!("two-cell-{kind}"),
        layout: Layout::Line,
        loads: vec![0.5, 0.5],
        num_users_total: 10,
        reward: RewardConfig::canonical(kind),
        training_s: 60.0,
        num_drops: 1,
        train_drops: Some(1),
        seed,
        ..Default::default()
    };
    // Own power, mean RSRP and mean interference only.
    config.agent.features = FeatureConfig { interference: InterferenceFeature::Aggregate, include_cell_reward: false };
    config
}

/// Relative shortfall of the reward at the final-10 s average powers.
fn two_cell_gap(kind: CanonicalReward, seed: u64) -> Result<(f64, Vec<f64>, Vec<f64>), String> {
    let config = two_cell(kind, seed);
    let mut agents = config.build_agents().map_err(|e| e.to_string())?;
    let drop = run_drop(&config, 0, Phase::Train, Controller::Learning(&mut agents)).map_err(|e| e.to_string())?;
    let end = drop.duration_ms;
    let avg = drop.time_averaged_power_dbm(end - 10_000, end).map_err(|e| e.to_string())?;
    let net = config.generate_network(0).map_err(|e| e.to_string())?;
    let floor = config.traffic.rate_floor_bps;
    let got = steady_state_reward(&net, &avg, &config.reward, floor).map_err(|e| e.to_string())?;
    let grid = grid_search(&net, &[GridSpec::default(); 2], &config.reward, floor).map_err(|e| e.to_string())?;
    Ok(((grid.best.reward - got) / grid.best.reward.abs(), avg, grid.best.powers_dbm))
}

fn criterion_two_cell() -> Outcome {
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for kind in [CanonicalReward::SumLogTput, CanonicalReward::HarmonicMeanTput] {
        let (gap, avg, best) = two_cell_gap(kind, TWO_CELL_SEED)?;
        let mut within = 0;
        for seed in 1..=ROBUSTNESS_SEEDS {
            within += usize::from(two_cell_gap(kind, seed)?.0 <= 0.05);
        }
        let line = format!(
            "{kind}: gap {:.2}% at [{:.1}, {:.1}] dBm vs optimum {best:?}; seeds 1..={ROBUSTNESS_SEEDS}: {within} within 5%",
            100.0 * gap,
            avg[0],
            avg[1]
        );
        if gap > 0.05 {
            failures.push(line.clone());
        }
        parts.push(line);
    }
    if failures.is_empty() {
        Ok(parts.join("; "))
    } else {
        Err(parts.join("; "))
    }
}

// Criterion 6: three-cell gains over paired drops.

fn criterion_three_cell() -> Outcome {
    let config = ScenarioConfig::default();
    let report = run_experiment(&config).map_err(|e| e.to_string())?;
    let (learned, baseline) = report.eval_drops();
    let summary = report.summary.ok_or("no evaluation drops")?;
    let worst_drop = learned
        .iter()
        .zip(&baseline)
        .map(|(l, b)| l.network_tput_bps / b.network_tput_bps - 1.0)
        .fold(f64::INFINITY, f64::min);
    let detail = format!(
        "{} paired eval drops: p5 gain {:+.1}%, median gain {:+.1}%, power reduction {:.2} dB ({:.0}% saving), \
         network throughput {:+.1}% (worst drop {:+.1}%)",
        learned.len(),
        100.0 * summary.p5_gain,
        100.0 * summary.median_gain,
        summary.power_reduction_db,
        100.0 * summary.power_saving,
        100.0 * summary.network_tput_change,
        100.0 * worst_drop
    );
    ensure(learned.len() >= 10, || format!("only {} eval drops", learned.len()))?;
    ensure(summary.p5_gain > 0.0 && summary.power_reduction_db >= 3.0 && summary.network_tput_change >= -0.10, || {
        detail.clone()
    })?;
    Ok(detail)
}

// Criterion 7: end-to-end determinism of the exports.

fn criterion_determinism() -> Outcome {
    let config = ScenarioConfig { training_s: 10.0, eval_s: 5.0, num_drops: 4, seed: 7, ..Default::default() };
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let mut files = Vec::new();
    for dir in &dirs {
        let report = run_experiment(&config).map_err(|e| e.to_string())?;
        files.push(export_results(&report, dir.path()).map_err(|e| e.to_string())?);
    }
    let mut bytes = 0;
    for (a, b) in files[0].iter().zip(&files[1]) {
        let (x, y) = (std::fs::read(a).map_err(|e| e.to_string())?, std::fs::read(b).map_err(|e| e.to_string())?);
        let name = a.file_name().unwrap_or_default().to_string_lossy().into_owned();
        ensure(x == y, || format!("{name} differs between runs"))?;
        ensure(x.iter().filter(|c| **c == b'\n').count() > 1, || format!("{name} has no data rows"))?;
        bytes += x.len();
    }
    Ok(format!("{} files, {bytes} bytes, identical across two runs", files[0].len()))
}

// Criterion 8: the reward family.

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn criterion_rewards() -> Outcome {
    use CanonicalReward::*;
    let e = math::E;
    let cases: [(CanonicalReward, Vec<f64>, f64); 10] = [
        (MeanUserTput, vec![1.0, 2.0, 3.0, 6.0], 3.0),
        (SumCellTput, vec![1.0, 2.0, 3.0, 6.0], 12.0),
        (MeanLogTput, vec![1.0, e], 0.5),
        (SumLogTput, vec![1.0, e], 1.0),
        (HarmonicMeanTput, vec![2.0, 2.0], 2.0),
        (HarmonicMeanTput, vec![1.0, 3.0], 1.5),
        (InverseSumInverseTput, vec![2.0, 2.0], 1.0),
        (InverseSumInverseTput, vec![1.0, 3.0], 0.75),
        (MeanLogTput, vec![1.0, 1.0, 1.0], 0.0),
        (SumCellTput, vec![0.5], 0.5),
    ];
    for (kind, values, expect) in &cases {
        let got = canonical_reward(*kind, values).map_err(|e| e.to_string())?;
        ensure(close(got, *expect), || format!("{kind} of {values:?}: {got} != {expect}"))?;
    }
    ensure(
        CanonicalReward::ALL.len() == 6 && CanonicalReward::ALL.iter().all(|k| cases.iter().any(|c| c.0 == *k)),
        || "not every canonical reward is covered".into(),
    )?;
    let af = |v: &[f64], a: f64, w: &[f64]| alpha_fair(v, a, w).map_err(|e| e.to_string());
    ensure(close(af(&[1.0, 1.0, 1.0], 0.3, &[1.0, 2.0, 3.0])?, 0.0), || "alpha-fair of ones".into())?;
    ensure(close(af(&[1.0, e], 1.0, &[1.0, 1.0])?, 1.0), || "alpha = 1 log identity".into())?;
    ensure(close(af(&[4.0, 9.0], 0.5, &[0.5, 0.5])?, 3.0), || "alpha = 0.5 closed form".into())?;
    let hm = RewardConfig::canonical(HarmonicMeanTput);
    ensure(close(network_reward(&[vec![1.0], vec![3.0]], &hm).map_err(|e| e.to_string())?, 1.5), || "pooled".into())?;
    let per_cell = RewardConfig { aggregation: Aggregation::SumOfCellRewards, ..hm };
    ensure(close(network_reward(&[vec![1.0], vec![3.0]], &per_cell).map_err(|e| e.to_string())?, 4.0), || {
        "sum of cells".into()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let limit: f64 = v.iter().zip(&w).map(|(x, wi)| wi * x.ln()).sum();
        for a in [1.0 - 1e-6, 1.0 + 1e-6] {
            worst = worst.max((af(&v, a, &w)? - limit).abs());
        }
    }
    ensure(worst < 1e-4, || format!("alpha -> 1 discontinuity {worst:e}"))?;
    Ok(format!("{} closed forms exact to 1e-12, alpha -> 1 gap {worst:.1e}", cases.len() + 5))
}

// Criterion 9: epsilon schedule endpoints.

fn criterion_epsilon() -> Outcome {
    let s = EpsilonSchedule::default();
    ensure(s.epsilon_at(0) == 0.9, || format!("eps(0) = {}", s.epsilon_at(0)))?;
    for n in [s.decay_actions, s.decay_actions + 1, 10 * s.decay_actions, u64::MAX] {
        ensure(s.epsilon_at(n) == 0.1, || format!("eps({n}) = {}", s.epsilon_at(n)))?;
    }
    Ok(format!("eps(0) = 0.9, eps(n >= {}) = 0.1", s.decay_actions))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "toy MDP matches value iteration",
            budget: Duration::from_secs(10),
            run: criterion_toy_mdp,
        },
        Criterion {
            id: 2,
            name: "loss gradient matches finite differences",
            budget: Duration::from_secs(10),
            run: criterion_gradient,
        },
        Criterion {
            id: 3,
            name: "transformed program is jointly convex",
            budget: Duration::from_secs(30),
            run: criterion_convexity,
        },
        Criterion {
            id: 4,
            name: "NUM solver agrees with grid search",
            budget: Duration::from_secs(120),
            run: criterion_num_vs_grid,
        },
        Criterion {
            id: 5,
            name: "two-cell learning reaches the grid optimum",
            budget: Duration::from_secs(1200),
            run: criterion_two_cell,
        },
        Criterion {
            id: 6,
            name: "three-cell learned policy beats fixed power",
            budget: Duration::from_secs(600),
            run: criterion_three_cell,
        },
        Criterion {
            id: 7,
            name: "exports are byte-identical for a fixed seed",
            budget: Duration::from_secs(60),
            run: criterion_determinism,
        },
        Criterion {
            id: 8,
            name: "reward family closed forms",
            budget: Duration::from_secs(10),
            run: criterion_rewards,
        },
        Criterion { id: 9, name: "epsilon schedule endpoints", budget: Duration::from_secs(1), run: criterion_epsilon },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; took {elapsed:.1?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {}. {}: {detail} ({elapsed:.1?})", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {}. {}: {why} ({elapsed:.1?})", c.id, c.name);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
