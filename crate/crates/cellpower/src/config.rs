//! Flat `key = value` scenario files.
//!
//! One assignment per line, `#` starts a comment, unknown or repeated keys are
//! errors. Lists are comma separated. [`write_config`] emits every key so a
//! written file parses back to the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use cellpower_core::agent::{ActionSet, InterferenceFeature};
use cellpower_core::netmodel::Layout;
use cellpower_core::qlearn::RewardScaling;
use cellpower_core::reward::{Aggregation, CanonicalReward, RewardConfig, WeightMode};
use cellpower_core::sim::ScenarioConfig;
use cellpower_core::traffic::{TrafficConfig, TrafficMode};

use crate::Error;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`: {reason}")]
    BadValue { line: usize, key: String, value: String, reason: String },
    #[error("{0}")]
    Inconsistent(String),
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        let Some((line, value)) = self.take(key) else { return Ok(None) };
        value.parse().map(Some).map_err(|_| ConfigError::BadValue {
            line,
            key: key.into(),
            value,
            reason: format!("expected {what}"),
        })
    }

    fn set<T: FromStr>(&mut self, key: &str, what: &str, slot: &mut T) -> Result<(), ConfigError> {
        if let Some(v) = self.parse(key, what)? {
            *slot = v;
        }
        Ok(())
    }

    fn list<T: FromStr>(&mut self, key: &str, what: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some((line, value)) = self.take(key) else { return Ok(None) };
        value.split(',').map(|s| s.trim().parse()).collect::<Result<Vec<T>, _>>().map(Some).map_err(|_| {
            ConfigError::BadValue { line, key: key.into(), value, reason: format!("expected a list of {what}") }
        })
    }

    fn choice<T>(&mut self, key: &str, options: &[(&str, T)]) -> Result<Option<T>, ConfigError>
    where
        T: Clone,
    {
        let Some((line, value)) = self.take(key) else { return Ok(None) };
        match options.iter().find(|(name, _)| *name == value) {
            Some((_, v)) => Ok(Some(v.clone())),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                Err(ConfigError::BadValue {
                    line,
                    key: key.into(),
                    value,
                    reason: format!("expected one of {}", names.join(", ")),
                })
            }
        }
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if map.insert(key.to_string(), (line, value.to_string())).is_some() {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
    }
    Ok(Entries { map })
}

const LAYOUTS: [(&str, Layout); 2] = [("line", Layout::Line), ("triangle", Layout::Triangle)];
const WEIGHTS: [(&str, WeightMode); 2] = [("uniform", WeightMode::Uniform), ("unit", WeightMode::Unit)];
const AGGREGATIONS: [(&str, Aggregation); 2] =
    [("network_pool", Aggregation::NetworkPool), ("sum_of_cells", Aggregation::SumOfCellRewards)];
const SCALINGS: [(&str, RewardScaling); 3] =
    [("none", RewardScaling::None), ("max_abs", RewardScaling::MaxAbs), ("min_max", RewardScaling::MinMax)];
const TRAFFIC: [(&str, bool); 2] = [("full_buffer", true), ("bursty", false)];
const SCHEDULING: [(&str, ()); 1] = [("round_robin", ())];
const BOOLS: [(&str, bool); 2] = [("true", true), ("false", false)];

fn name_of<T: PartialEq>(options: &[(&'static str, T)], value: &T) -> &'static str {
    options.iter().find(|(_, v)| v == value).map(|(n, _)| *n).expect("every variant is named")
}

fn parse_interference(line: usize, value: &str) -> Result<InterferenceFeature, ConfigError> {
    if value == "aggregate" {
        return Ok(InterferenceFeature::Aggregate);
    }
    value.strip_prefix("top").and_then(|k| k.parse().ok()).filter(|k| *k > 0).map(InterferenceFeature::TopK).ok_or_else(
        || ConfigError::BadValue {
            line,
            key: "interference_feature".into(),
            value: value.into(),
            reason: "expected `aggregate` or `topK` with K >= 1".into(),
        },
    )
}

/// Parses a scenario, starting from the defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut e = tokenize(text)?;
    let mut c = ScenarioConfig::default();

    if let Some((_, v)) = e.take("name") {
        c.name = v;
    }
    if let Some(v) = e.choice("layout", &LAYOUTS)? {
        c.layout = v;
    }
    e.set("inter_site_distance_m", "a number", &mut c.inter_site_distance_m)?;
    let loads: Option<Vec<f64>> = e.list("loads", "numbers")?;
    let num_cells: Option<usize> = e.parse("num_cells", "an integer")?;
    match (loads, num_cells) {
        (Some(l), Some(n)) if l.len() != n => {
            return Err(ConfigError::Inconsistent(format!("num_cells = {n} but {} loads given", l.len())));
        }
        (Some(l), _) => c.loads = l,
        (None, Some(n)) => c.loads = vec![1.0 / n as f64; n],
        (None, None) => {}
    }
    e.set("num_users_total", "an integer", &mut c.num_users_total)?;

    let full_buffer = e.choice("traffic_type", &TRAFFIC)?.unwrap_or(c.traffic.is_full_buffer());
    let file_size: Option<f64> = e.parse("file_size_bytes", "a number")?;
    let reading: Option<f64> = e.parse("mean_reading_time_s", "a number")?;
    let floor = e.parse("rate_floor_bps", "a number")?.unwrap_or(c.traffic.rate_floor_bps);
    c.traffic = if full_buffer {
        if file_size.is_some() || reading.is_some() {
            return Err(ConfigError::Inconsistent("file size and reading time need traffic_type = bursty".into()));
        }
        TrafficConfig::full_buffer()
    } else {
        match (file_size, reading) {
            (Some(s), Some(r)) => TrafficConfig::bursty(s, r),
            _ => {
                return Err(ConfigError::Inconsistent(
                    "bursty traffic needs file_size_bytes and mean_reading_time_s".into(),
                ))
            }
        }
    };
    c.traffic.rate_floor_bps = floor;

    if let Some((line, v)) = e.take("reward") {
        c.reward = if v == "alpha_fair" {
            let alpha = e
                .parse("alpha", "a number")?
                .ok_or_else(|| ConfigError::Inconsistent("reward = alpha_fair needs alpha".into()))?;
            let weights = e.choice("weight_mode", &WEIGHTS)?.unwrap_or(WeightMode::Uniform);
            RewardConfig::alpha_fair(alpha, weights)
        } else {
            let kind = CanonicalReward::from_str(&v).map_err(|err| ConfigError::BadValue {
                line,
                key: "reward".into(),
                value: v.clone(),
                reason: err.to_string(),
            })?;
            RewardConfig::canonical(kind)
        };
    }
    if e.map.contains_key("alpha") || e.map.contains_key("weight_mode") {
        return Err(ConfigError::Inconsistent("alpha and weight_mode need reward = alpha_fair".into()));
    }
    if let Some(v) = e.choice("reward_aggregation", &AGGREGATIONS)? {
        c.reward.aggregation = v;
    }
    if let Some((line, v)) = e.take("neighbor_radius_m") {
        c.reward.neighbor_radius_m = if v == "none" {
            None
        } else {
            Some(v.parse().map_err(|_| ConfigError::BadValue {
                line,
                key: "neighbor_radius_m".into(),
                value: v.clone(),
                reason: "expected a number or `none`".into(),
            })?)
        };
    }

    e.set("action_period_ms", "an integer", &mut c.action_period_ms)?;
    e.choice("agents_scheduling", &SCHEDULING)?;
    let a = &mut c.agent;
    e.set("policy_update_period", "an integer", &mut a.policy_update_period)?;
    e.set("eps_min", "a number", &mut a.epsilon.eps_min)?;
    e.set("eps_max", "a number", &mut a.epsilon.eps_max)?;
    e.set("decay_actions", "an integer", &mut a.epsilon.decay_actions)?;
    e.set("gamma", "a number", &mut a.learner.gamma)?;
    if let Some(h) = e.list("hidden_layers", "integers")? {
        a.learner.hidden = h;
    }
    e.set("epochs_per_round", "an integer", &mut a.learner.epochs_per_round)?;
    e.set("init_scale", "a number", &mut a.learner.init_scale)?;
    if let Some(v) = e.choice("reward_scaling", &SCALINGS)? {
        a.learner.reward_scaling = v;
    }
    e.set("rprop_eta_plus", "a number", &mut a.learner.rprop.eta_plus)?;
    e.set("rprop_eta_minus", "a number", &mut a.learner.rprop.eta_minus)?;
    e.set("rprop_delta_init", "a number", &mut a.learner.rprop.delta_init)?;
    e.set("rprop_delta_min", "a number", &mut a.learner.rprop.delta_min)?;
    e.set("rprop_delta_max", "a number", &mut a.learner.rprop.delta_max)?;
    if let Some((line, v)) = e.take("interference_feature") {
        a.features.interference = parse_interference(line, &v)?;
    }
    if let Some(v) = e.choice("include_cell_reward", &BOOLS)? {
        a.features.include_cell_reward = v;
    }
    if let Some(d) = e.list("action_deltas_db", "numbers")? {
        a.actions = ActionSet { deltas_db: d };
    }
    e.set("min_power_dbm", "a number", &mut a.min_power_dbm)?;
    e.set("max_power_dbm", "a number", &mut a.max_power_dbm)?;

    e.set("tti_ms", "an integer", &mut c.tti_ms)?;
    e.set("bandwidth_hz", "a number", &mut c.bandwidth_hz)?;
    e.set("default_power_dbm", "a number", &mut c.default_power_dbm)?;
    e.set("noise_figure_db", "a number", &mut c.noise_figure_db)?;
    e.set("pathloss_intercept_db", "a number", &mut c.pathloss_intercept_db)?;
    e.set("pathloss_slope_db", "a number", &mut c.pathloss_slope_db)?;
    e.set("shadowing_sigma_db", "a number", &mut c.shadowing_sigma_db)?;
    e.set("training_s", "a number", &mut c.training_s)?;
    e.set("eval_s", "a number", &mut c.eval_s)?;
    e.set("num_drops", "an integer", &mut c.num_drops)?;
    if let Some(n) = e.parse("train_drops", "an integer")? {
        c.train_drops = Some(n);
    }
    e.set("seed", "an integer", &mut c.seed)?;

    if let Some((key, (line, _))) = e.map.into_iter().min_by_key(|(_, (line, _))| *line) {
        return Err(ConfigError::UnknownKey { line, key });
    }
    c.validate().map_err(|err| ConfigError::Inconsistent(err.to_string()))?;
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    parse_config(&text).map_err(|source| Error::Config { path: path.into(), source })
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Every key of the resolved configuration, in a fixed order.
pub fn write_config(c: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: &dyn std::fmt::Display| {
        writeln!(out, "{k} = {v}").expect("writing to a String");
    };
    put("name", &c.name);
    put("layout", &name_of(&LAYOUTS, &c.layout));
    put("inter_site_distance_m", &c.inter_site_distance_m);
    put("num_cells", &c.num_cells());
    put("loads", &join(&c.loads));
    put("num_users_total", &c.num_users_total);
    put("traffic_type", &name_of(&TRAFFIC, &c.traffic.is_full_buffer()));
    if let TrafficMode::Bursty { file_size_bytes, mean_reading_time_s } = c.traffic.mode {
        put("file_size_bytes", &file_size_bytes);
        put("mean_reading_time_s", &mean_reading_time_s);
    }
    put("rate_floor_bps", &c.traffic.rate_floor_bps);
    match c.reward.canonical {
        Some(kind) => put("reward", &kind),
        None => {
            put("reward", &"alpha_fair");
            put("alpha", &c.reward.alpha);
            put("weight_mode", &name_of(&WEIGHTS, &c.reward.weight_mode));
        }
    }
    put("reward_aggregation", &name_of(&AGGREGATIONS, &c.reward.aggregation));
    match c.reward.neighbor_radius_m {
        Some(r) => put("neighbor_radius_m", &r),
        None => put("neighbor_radius_m", &"none"),
    }
    put("action_period_ms", &c.action_period_ms);
    put("agents_scheduling", &"round_robin");
    let a = &c.agent;
    put("policy_update_period", &a.policy_update_period);
    put("eps_min", &a.epsilon.eps_min);
    put("eps_max", &a.epsilon.eps_max);
    put("decay_actions", &a.epsilon.decay_actions);
    put("gamma", &a.learner.gamma);
    put("hidden_layers", &join(&a.learner.hidden));
    put("epochs_per_round", &a.learner.epochs_per_round);
    put("init_scale", &a.learner.init_scale);
    put("reward_scaling", &name_of(&SCALINGS, &a.learner.reward_scaling));
    put("rprop_eta_plus", &a.learner.rprop.eta_plus);
    put("rprop_eta_minus", &a.learner.rprop.eta_minus);
    put("rprop_delta_init", &a.learner.rprop.delta_init);
    put("rprop_delta_min", &a.learner.rprop.delta_min);
    put("rprop_delta_max", &a.learner.rprop.delta_max);
    match a.features.interference {
        InterferenceFeature::Aggregate => put("interference_feature", &"aggregate"),
        InterferenceFeature::TopK(k) => put("interference_feature", &format!("top{k}")),
    }
    put("include_cell_reward", &a.features.include_cell_reward);
    put("action_deltas_db", &join(&a.actions.deltas_db));
    put("min_power_dbm", &a.min_power_dbm);
    put("max_power_dbm", &a.max_power_dbm);
    put("tti_ms", &c.tti_ms);
    put("bandwidth_hz", &c.bandwidth_hz);
    put("default_power_dbm", &c.default_power_dbm);
    put("noise_figure_db", &c.noise_figure_db);
    put("pathloss_intercept_db", &c.pathloss_intercept_db);
    put("pathloss_slope_db", &c.pathloss_slope_db);
    put("shadowing_sigma_db", &c.shadowing_sigma_db);
    put("training_s", &c.training_s);
    put("eval_s", &c.eval_s);
    put("num_drops", &c.num_drops);
    if let Some(n) = c.train_drops {
        put("train_drops", &n);
    }
    put("seed", &c.seed);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("# nothing\n\n").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn defaults_round_trip() {
        let c = ScenarioConfig::default();
        assert_eq!(parse_config(&write_config(&c)).unwrap(), c);
    }

    #[test]
    fn custom_config_round_trips() {
        let text = "\
name = bursty-two
layout = line
loads = 0.25, 0.75
num_users_total = 8
traffic_type = bursty
file_size_bytes = 500000
mean_reading_time_s = 2.5
reward = alpha_fair   # proportional fairness
alpha = 1
weight_mode = unit
reward_aggregation = sum_of_cells
neighbor_radius_m = 750
reward_scaling = max_abs
interference_feature = top1
include_cell_reward = false
action_deltas_db = 0, 1, -1
hidden_layers = 8, 4
train_drops = 1
num_drops = 3
seed = 42
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.num_cells(), 2);
        assert_eq!(c.traffic, TrafficConfig::bursty(500000.0, 2.5));
        assert_eq!(c.reward.alpha, 1.0);
        assert_eq!(c.reward.canonical, None);
        assert_eq!(c.reward.neighbor_radius_m, Some(750.0));
        assert_eq!(c.agent.features.interference, InterferenceFeature::TopK(1));
        assert_eq!(c.agent.learner.hidden, vec![8, 4]);
        assert_eq!(c.train_drops, Some(1));
        assert_eq!(parse_config(&write_config(&c)).unwrap(), c);
    }

    #[test]
    fn num_cells_alone_spreads_load_evenly() {
        let c = parse_config("num_cells = 2\nlayout = line\n").unwrap();
        assert_eq!(c.loads, vec![0.5, 0.5]);
        assert!(matches!(parse_config("num_cells = 2\nloads = 1\n"), Err(ConfigError::Inconsistent(_))));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse_config("seed = 1\nbogus = 3\n"),
            Err(ConfigError::UnknownKey { line: 2, key: "bogus".into() })
        );
        assert_eq!(parse_config("seed 1\n"), Err(ConfigError::Syntax { line: 1 }));
        assert_eq!(parse_config("seed = 1\nseed = 2\n"), Err(ConfigError::Duplicate { line: 2, key: "seed".into() }));
        assert!(matches!(parse_config("gamma = high\n"), Err(ConfigError::BadValue { line: 1, .. })));
        assert!(matches!(parse_config("reward = median\n"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(parse_config("alpha = 2\n"), Err(ConfigError::Inconsistent(_))));
        assert!(matches!(parse_config("traffic_type = bursty\n"), Err(ConfigError::Inconsistent(_))));
    }

    #[test]
    fn shipped_scenarios_parse() {
        let three = parse_config(include_str!("../../../configs/three_cell.cfg")).unwrap();
        assert_eq!(three, ScenarioConfig { name: "three-cell".into(), ..Default::default() });
        let two = parse_config(include_str!("../../../configs/two_cell.cfg")).unwrap();
        assert_eq!(two.users_per_cell(), vec![5, 5]);
        let bursty = parse_config(include_str!("../../../configs/bursty.cfg")).unwrap();
        assert!(!bursty.traffic.is_full_buffer());
    }

    #[test]
    fn semantic_validation_runs() {
        assert!(matches!(parse_config("loads = 0.5, 0.7\n"), Err(ConfigError::Inconsistent(_))));
        assert!(matches!(parse_config("training_s = 0\n"), Err(ConfigError::Inconsistent(_))));
    }
}
