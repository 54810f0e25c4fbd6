use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cellpower::config::load_config;
use cellpower::export::{self, export_results};
use cellpower::persist::save_agents;
use cellpower_core::oracle::{grid_search, solve_num, GridSpec, NumProblem};
use cellpower_core::sim::{compute_cdf, run_baseline, run_experiment, ScenarioConfig};

#[derive(Parser)]
#[command(name = "cellpower", version, about = "Multi-cell downlink power control with per-cell Q-learning agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate the agents, with the paired fixed-power baseline.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed of the file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also dump the trained agents to this file.
        #[arg(long)]
        save_agents: Option<PathBuf>,
    },
    /// Exact optimization baselines on one drop.
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
    /// Fixed default power on every drop.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleKind {
    /// Exhaustive search over 1 dB power levels.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        drop: usize,
        /// Writes the full reward surface here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Projected-gradient optimum of the log-transformed utility program.
    Num {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        drop: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut config = load_config(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn fmt_powers(p: &[f64]) -> String {
    p.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

fn run(config: &ScenarioConfig, out: &Path, agents_path: Option<&Path>) -> Result<()> {
    let report = run_experiment(config).context("experiment failed")?;
    for path in export_results(&report, out)? {
        println!("wrote {}", path.display());
    }
    if let Some(path) = agents_path {
        save_agents(path, &report.agents)?;
        println!("wrote {}", path.display());
    }
    match &report.summary {
        Some(s) => {
            println!("eval drops: {}", report.eval_drops().0.len());
            println!("5%-tile gain: {:+.1}%", 100.0 * s.p5_gain);
            println!("median gain: {:+.1}%", 100.0 * s.median_gain);
            println!("power reduction: {:.2} dB ({:.1}% saving)", s.power_reduction_db, 100.0 * s.power_saving);
            println!("network throughput change: {:+.1}%", 100.0 * s.network_tput_change);
        }
        None => println!("no evaluation drops; no gains reported"),
    }
    Ok(())
}

fn oracle_grid(config: &ScenarioConfig, drop: usize, out: Option<&Path>) -> Result<()> {
    let net = config.generate_network(drop)?;
    let spec = GridSpec { lo_dbm: config.agent.min_power_dbm, hi_dbm: config.agent.max_power_dbm, step_db: 1.0 };
    let grids = vec![spec; config.num_cells()];
    let result = grid_search(&net, &grids, &config.reward, config.traffic.rate_floor_bps)?;
    println!("grid points: {}", result.surface.len());
    println!("best powers (dBm): {}", fmt_powers(&result.best.powers_dbm));
    println!("best reward: {}", result.best.reward);
    if let Some(path) = out {
        export::write_file(path, &export::surface_csv(&result, config.num_cells()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn oracle_num(config: &ScenarioConfig, drop: usize, tol: f64, max_iters: usize) -> Result<()> {
    let net = config.generate_network(drop)?;
    let problem =
        NumProblem::from_network(&net, config.reward.alpha, config.agent.min_power_dbm, config.agent.max_power_dbm)?;
    let sol = solve_num(&problem, tol, max_iters)?;
    println!("powers (dBm): {}", fmt_powers(&sol.powers_dbm));
    println!("utility: {}", sol.utility);
    println!("kkt residual: {:e} after {} iterations", sol.kkt_residual, sol.iterations);
    anyhow::ensure!(sol.converged, "solver did not reach tolerance {tol:e} within {max_iters} iterations");
    Ok(())
}

fn baseline(config: &ScenarioConfig, out: Option<&Path>) -> Result<()> {
    let drops = run_baseline(config)?;
    let all: Vec<f64> = drops.iter().flat_map(|d| d.user_throughput_bps.iter().copied()).collect();
    let cdf = compute_cdf(&all)?;
    let p = cdf.percentiles;
    println!("drops: {}, users: {}", drops.len(), all.len());
    println!("user throughput (Mbit/s): p5 {:.3}, median {:.3}, p95 {:.3}", p.p5 / 1e6, p.p50 / 1e6, p.p95 / 1e6);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(export::BASELINE_USERS_CSV);
        export::write_file(&path, &export::users_csv(&drops))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out, save_agents } => {
            load(&config, seed).and_then(|c| run(&c, &out, save_agents.as_deref()))
        }
        Command::Oracle { kind: OracleKind::Grid { config, drop, out } } => {
            load(&config, None).and_then(|c| oracle_grid(&c, drop, out.as_deref()))
        }
        Command::Oracle { kind: OracleKind::Num { config, drop, tol, max_iters } } => {
            load(&config, None).and_then(|c| oracle_num(&c, drop, tol, max_iters))
        }
        Command::Baseline { config, seed, out } => load(&config, seed).and_then(|c| baseline(&c, out.as_deref())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
