//! CSV exports of an experiment.
//!
//! Every file has a header row; floats use Rust's shortest round-trip
//! formatting so a fixed seed always yields the same bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cellpower_core::agent::Phase;
use cellpower_core::math;
use cellpower_core::oracle::GridResult;
use cellpower_core::sim::{DropResult, ExperimentReport, GainSummary};

use crate::config::write_config;
use crate::Error;

pub const USERS_CSV: &str = "users.csv";
pub const BASELINE_USERS_CSV: &str = "baseline_users.csv";
pub const POWER_CSV: &str = "power.csv";
pub const REWARD_CSV: &str = "reward.csv";
pub const ACTIONS_CSV: &str = "actions.csv";
pub const DROPS_CSV: &str = "drops.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const CONFIG_TXT: &str = "config.txt";
pub const SURFACE_CSV: &str = "surface.csv";

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Train => "train",
        Phase::Eval => "eval",
    }
}

fn line(out: &mut String, fields: &[&dyn std::fmt::Display]) {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{f}").expect("writing to a String");
    }
    out.push('\n');
}

pub fn users_csv(drops: &[DropResult]) -> String {
    let mut out = String::from("drop,phase,user,cell,avg_tput_bps\n");
    for d in drops {
        for (u, (cell, tput)) in d.user_cell.iter().zip(&d.user_throughput_bps).enumerate() {
            line(&mut out, &[&d.index, &phase_name(d.phase), &u, cell, tput]);
        }
    }
    out
}

pub fn power_csv(drops: &[DropResult]) -> String {
    let mut out = String::from("drop,time_ms,cell,power_dbm\n");
    for d in drops {
        for s in &d.power_trace {
            for (cell, p) in s.powers_dbm.iter().enumerate() {
                line(&mut out, &[&d.index, &s.time_ms, &cell, p]);
            }
        }
    }
    out
}

pub fn reward_csv(drops: &[DropResult]) -> String {
    let mut out = String::from("drop,time_ms,reward\n");
    for d in drops {
        for (t, r) in &d.reward_trace {
            line(&mut out, &[&d.index, t, r]);
        }
    }
    out
}

pub fn actions_csv(drops: &[DropResult]) -> String {
    let mut out = String::from("drop,time_ms,agent,epsilon,delta_db,power_dbm,reward\n");
    for d in drops {
        for a in &d.actions {
            line(&mut out, &[&d.index, &a.time_ms, &a.agent, &a.epsilon, &a.delta_db, &a.power_dbm, &a.reward]);
        }
    }
    out
}

/// Per-drop aggregates of both policies; `mean_power_dbm` is the linear
/// mean over cells.
pub fn drops_csv(learned: &[DropResult], baseline: &[DropResult]) -> String {
    let mut out =
        String::from("drop,phase,policy,p5_bps,p50_bps,p95_bps,network_tput_bps,mean_power_dbm,training_rounds\n");
    for (policy, drops) in [("learned", learned), ("baseline", baseline)] {
        for d in drops {
            let linear: Vec<f64> = d.mean_power_dbm.iter().map(|p| math::dbm_to_watts(*p)).collect();
            let mean_dbm = math::watts_to_dbm(math::mean(&linear));
            let p = &d.percentiles;
            line(
                &mut out,
                &[
                    &d.index,
                    &phase_name(d.phase),
                    &policy,
                    &p.p5,
                    &p.p50,
                    &p.p95,
                    &d.network_tput_bps,
                    &mean_dbm,
                    &d.training_rounds,
                ],
            );
        }
    }
    out
}

pub fn summary_csv(summary: Option<&GainSummary>, eval_drops: usize) -> String {
    let mut out = String::from("metric,value\n");
    if let Some(s) = summary {
        line(&mut out, &[&"eval_drops", &eval_drops]);
        line(&mut out, &[&"p5_gain", &s.p5_gain]);
        line(&mut out, &[&"median_gain", &s.median_gain]);
        line(&mut out, &[&"power_reduction_db", &s.power_reduction_db]);
        line(&mut out, &[&"power_saving", &s.power_saving]);
        line(&mut out, &[&"network_tput_change", &s.network_tput_change]);
    }
    out
}

/// The fixed-power reward surface, one row per grid point.
pub fn surface_csv(grid: &GridResult, num_cells: usize) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..num_cells).map(|c| format!("power_dbm_{c}")).chain(["reward".to_string()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for p in &grid.surface {
        let mut fields: Vec<&dyn std::fmt::Display> =
            p.powers_dbm.iter().map(|x| x as &dyn std::fmt::Display).collect();
        fields.push(&p.reward);
        line(&mut out, &fields);
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.into(), source })
}

/// Writes every experiment file into `out_dir`, creating it if needed, and
/// returns the paths in write order.
pub fn export_results(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>, Error> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io { path: out_dir.into(), source })?;
    let (eval, _) = report.eval_drops();
    let files = [
        (USERS_CSV, users_csv(&report.learned)),
        (BASELINE_USERS_CSV, users_csv(&report.baseline)),
        (POWER_CSV, power_csv(&report.learned)),
        (REWARD_CSV, reward_csv(&report.learned)),
        (ACTIONS_CSV, actions_csv(&report.learned)),
        (DROPS_CSV, drops_csv(&report.learned, &report.baseline)),
        (SUMMARY_CSV, summary_csv(report.summary.as_ref(), eval.len())),
        (CONFIG_TXT, write_config(&report.config)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = out_dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellpower_core::sim::ScenarioConfig;

    fn empty_report() -> ExperimentReport {
        ExperimentReport {
            config: ScenarioConfig::default(),
            learned: vec![],
            baseline: vec![],
            summary: None,
            agents: vec![],
        }
    }

    #[test]
    fn empty_run_gives_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        for path in export_results(&empty_report(), dir.path()).unwrap() {
            let text = std::fs::read_to_string(&path).unwrap();
            if path.ends_with(CONFIG_TXT) {
                continue;
            }
            assert_eq!(text.lines().count(), 1, "{}", path.display());
            assert!(text.ends_with('\n'));
        }
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = export_results(&empty_report(), &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }

    #[test]
    fn summary_rows() {
        let s = GainSummary {
            p5_gain: 0.5,
            median_gain: 0.25,
            power_reduction_db: 3.0,
            power_saving: 0.5,
            network_tput_change: -0.125,
        };
        assert_eq!(
            summary_csv(Some(&s), 4),
            "metric,value\neval_drops,4\np5_gain,0.5\nmedian_gain,0.25\npower_reduction_db,3\npower_saving,0.5\nnetwork_tput_change,-0.125\n"
        );
    }
}
