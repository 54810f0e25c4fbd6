//! Exact baselines for the learned policies.
//!
//! [`grid_search`] evaluates the steady-state network reward (equal
//! bandwidth share, Shannon rates, no stochastic simulation) on a power
//! grid. [`solve_num`] solves the utility-maximization program after the
//! change of variables `r~ = ln r`, `p~ = ln p`, in which the capacity
//! constraints `r~_n <= ln W_n + ln log2(1 + sinr_n(e^p~))` are jointly
//! convex.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::netmodel::{Network, PowerVector};
use crate::reward::{network_reward, RewardConfig};
use crate::rng::SimRng;

pub const MAX_GRID_POINTS: u128 = 1_000_000;

/// Steady-state rates are reported to rewards in Mbit/s.
pub const RATE_UNIT_BPS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo_dbm: f64,
    pub hi_dbm: f64,
    pub step_db: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { lo_dbm: 10.0, hi_dbm: 46.0, step_db: 1.0 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo_dbm <= self.hi_dbm) || !(self.step_db > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("invalid grid {self:?}")));
        }
        Ok(())
    }

    pub fn levels(&self) -> Vec<f64> {
        let n = math::floor((self.hi_dbm - self.lo_dbm) / self.step_db + 1e-9) as usize + 1;
        (0..n).map(|k| self.lo_dbm + k as f64 * self.step_db).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub powers_dbm: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: GridPoint,
    /// Every evaluated point, lexicographic in the cell powers.
    pub surface: Vec<GridPoint>,
}

/// Network reward of the steady state at fixed powers, with per-user rates
/// in Mbit/s floored at `rate_floor_bps`.
pub fn steady_state_reward(
    network: &Network,
    powers_dbm: &[f64],
    reward: &RewardConfig,
    rate_floor_bps: f64,
) -> Result<f64> {
    if powers_dbm.len() != network.num_cells() {
        return Err(Error::DimensionMismatch { expected: network.num_cells(), got: powers_dbm.len() });
    }
    let rates = network.steady_state_rates(&PowerVector::from_dbm(powers_dbm));
    let mut per_cell: Vec<Vec<f64>> = alloc::vec![Vec::new(); network.num_cells()];
    for (u, r) in network.users.iter().zip(rates) {
        per_cell[u.serving_cell].push(r.max(rate_floor_bps) / RATE_UNIT_BPS);
    }
    network_reward(&per_cell, reward)
}

/// Total order used to pick the grid optimum: higher reward, then lower
/// total linear power, then lexicographically lower powers.
fn better(a: &GridPoint, b: &GridPoint) -> Ordering {
    let total = |p: &GridPoint| p.powers_dbm.iter().map(|d| math::dbm_to_watts(*d)).sum::<f64>();
    a.reward
        .partial_cmp(&b.reward)
        .unwrap_or(Ordering::Equal)
        .then_with(|| total(b).partial_cmp(&total(a)).unwrap_or(Ordering::Equal))
        .then_with(|| {
            b.powers_dbm
                .iter()
                .zip(&a.powers_dbm)
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
}

/// Best point of a surface; independent of the order of `points`.
pub fn select_best(points: &[GridPoint]) -> Option<&GridPoint> {
    points.iter().max_by(|a, b| better(a, b))
}

pub fn grid_search(
    network: &Network,
    grids: &[GridSpec],
    reward: &RewardConfig,
    rate_floor_bps: f64,
) -> Result<GridResult> {
    if grids.len() != network.num_cells() {
        return Err(Error::DimensionMismatch { expected: network.num_cells(), got: grids.len() });
    }
    let mut levels = Vec::with_capacity(grids.len());
    let mut points: u128 = 1;
    for g in grids {
        g.validate()?;
        let l = g.levels();
        points = points.saturating_mul(l.len() as u128);
        levels.push(l);
    }
    if points > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge { points, limit: MAX_GRID_POINTS });
    }
    let mut surface = Vec::with_capacity(points as usize);
    let mut idx = alloc::vec![0usize; grids.len()];
    loop {
        let powers_dbm: Vec<f64> = idx.iter().zip(&levels).map(|(&i, l)| l[i]).collect();
        let r = steady_state_reward(network, &powers_dbm, reward, rate_floor_bps)?;
        if !r.is_finite() {
            return Err(Error::NonFinite(alloc::format!("grid reward at {powers_dbm:?}")));
        }
        surface.push(GridPoint { powers_dbm, reward: r });
        // Odometer increment, last cell fastest.
        let mut k = grids.len();
        loop {
            if k == 0 {
                let best = select_best(&surface).cloned().ok_or(Error::EmptyInput("grid"))?;
                return Ok(GridResult { best, surface });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < levels[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Alpha-fair utility with unit weights, for `alpha >= 1`, on rates in
/// [`RATE_UNIT_BPS`].
#[derive(Debug, Clone, PartialEq)]
pub struct NumProblem {
    /// `gains[n][c]`, linear.
    pub gains: Vec<Vec<f64>>,
    pub serving: Vec<usize>,
    pub noise_w: f64,
    pub min_power_w: Vec<f64>,
    pub max_power_w: Vec<f64>,
    pub user_bandwidth_hz: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumSolution {
    pub powers_w: Vec<f64>,
    pub powers_dbm: Vec<f64>,
    pub rates_bps: Vec<f64>,
    pub utility: f64,
    /// Infinity norm of `x - proj(x + grad)` in log-power space.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NumProblem {
    pub fn from_network(network: &Network, alpha: f64, min_power_dbm: f64, max_power_dbm: f64) -> Result<Self> {
        let counts = network.users_per_cell();
        let problem = Self {
            gains: network.users.iter().map(|u| u.gains.clone()).collect(),
            serving: network.users.iter().map(|u| u.serving_cell).collect(),
            noise_w: network.channel.noise_power_w,
            min_power_w: alloc::vec![math::dbm_to_watts(min_power_dbm); network.num_cells()],
            max_power_w: alloc::vec![math::dbm_to_watts(max_power_dbm); network.num_cells()],
            user_bandwidth_hz: network
                .users
                .iter()
                .map(|u| network.cells[u.serving_cell].bandwidth_hz / counts[u.serving_cell] as f64)
                .collect(),
            alpha,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.max_power_w.len();
        if self.gains.is_empty() {
            return Err(Error::EmptyInput("NUM problem has no users"));
        }
        if self.min_power_w.len() != c
            || self.serving.len() != self.gains.len()
            || self.user_bandwidth_hz.len() != self.gains.len()
        {
            return Err(Error::DimensionMismatch { expected: self.gains.len(), got: self.serving.len() });
        }
        for (g, &s) in self.gains.iter().zip(&self.serving) {
            if g.len() != c || s >= c || g.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::InvalidConfig("NUM gains must be positive and cover every cell".into()));
            }
        }
        if !(self.noise_w > 0.0) {
            return Err(Error::NonPositive { what: "noise power", value: self.noise_w });
        }
        if self.min_power_w.iter().zip(&self.max_power_w).any(|(lo, hi)| !(*lo > 0.0 && lo <= hi)) {
            return Err(Error::InvalidConfig("NUM power bounds must satisfy 0 < min <= max".into()));
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.max_power_w.len()
    }

    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    pub fn log_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.min_power_w.iter().map(|p| math::ln(*p)).collect(),
            self.max_power_w.iter().map(|p| math::ln(*p)).collect(),
        )
    }

    fn sinr_parts(&self, n: usize, powers: &[f64]) -> (f64, f64) {
        let s = self.serving[n];
        let mut denom = self.noise_w;
        for (c, (g, p)) in self.gains[n].iter().zip(powers).enumerate() {
            if c != s {
                denom += g * p;
            }
        }
        (self.gains[n][s] * powers[s] / denom, denom)
    }

    /// Rates in bits/s at linear powers.
    pub fn rates_bps(&self, powers: &[f64]) -> Vec<f64> {
        (0..self.num_users())
            .map(|n| self.user_bandwidth_hz[n] * math::ln_1p(self.sinr_parts(n, powers).0) / math::LN_2)
            .collect()
    }

    /// `u(x)` for a rate `x` in Mbit/s.
    pub fn utility(&self, x: f64) -> f64 {
        if self.alpha == 1.0 {
            math::ln(x)
        } else {
            let k = 1.0 - self.alpha;
            math::exp_m1(k * math::ln(x)) / k
        }
    }

    /// `u(e^r~)` summed over users.
    pub fn objective_log_rates(&self, log_rates: &[f64]) -> f64 {
        log_rates
            .iter()
            .map(|&r| if self.alpha == 1.0 { r } else { math::exp_m1((1.0 - self.alpha) * r) / (1.0 - self.alpha) })
            .sum()
    }

    /// Transformed capacity bound `ln(W_n) + ln(log2(1 + sinr_n(e^p~)))`,
    /// with `W_n` in Mbit/s so it is comparable to `ln r` in the same unit.
    pub fn capacity_log(&self, n: usize, log_powers: &[f64]) -> f64 {
        let powers: Vec<f64> = log_powers.iter().map(|x| math::exp(*x)).collect();
        let sinr = self.sinr_parts(n, &powers).0;
        math::ln(self.user_bandwidth_hz[n] / RATE_UNIT_BPS) + math::ln(math::ln_1p(sinr) / math::LN_2)
    }

    /// Objective with every capacity constraint active.
    pub fn objective_log_powers(&self, log_powers: &[f64]) -> f64 {
        let powers: Vec<f64> = log_powers.iter().map(|x| math::exp(*x)).collect();
        self.rates_bps(&powers).iter().map(|r| self.utility(r / RATE_UNIT_BPS)).sum()
    }

    pub fn gradient_log_powers(&self, log_powers: &[f64]) -> Vec<f64> {
        let powers: Vec<f64> = log_powers.iter().map(|x| math::exp(*x)).collect();
        let mut grad = alloc::vec![0.0; self.num_cells()];
        for n in 0..self.num_users() {
            let (sinr, denom) = self.sinr_parts(n, &powers);
            let rate = self.user_bandwidth_hz[n] / RATE_UNIT_BPS * math::ln_1p(sinr) / math::LN_2;
            let du = math::powf(rate, -self.alpha);
            let dr_dsinr = self.user_bandwidth_hz[n] / RATE_UNIT_BPS / ((1.0 + sinr) * math::LN_2);
            let s = self.serving[n];
            for (c, g) in grad.iter_mut().enumerate() {
                let dsinr = if c == s { sinr } else { -sinr * self.gains[n][c] * powers[c] / denom };
                *g += du * dr_dsinr * dsinr;
            }
        }
        grad
    }
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Projected-gradient ascent in log-power space.
///
/// The utility is strictly increasing, so every capacity constraint is
/// active at the optimum; it is eliminated by setting `r~ = g(p~)`, which
/// leaves a concave objective over the box of log powers. Steps use Armijo
/// backtracking along the projection arc.
pub fn solve_num(problem: &NumProblem, tol: f64, max_iters: usize) -> Result<NumSolution> {
    problem.validate()?;
    if !(problem.alpha >= 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "the NUM solver needs alpha >= 1 for a concave objective, got {}",
            problem.alpha
        )));
    }
    let (lo, hi) = problem.log_bounds();
    let mut x = hi.clone();
    let mut f = problem.objective_log_powers(&x);
    let mut g = problem.gradient_log_powers(&x);
    let mut step = 1.0;
    let residual = |x: &[f64], g: &[f64]| {
        let mut y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + b).collect();
        project(&mut y, &lo, &hi);
        y.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let mut res = residual(&x, &g);
    let mut iterations = 0;
    while res >= tol && iterations < max_iters {
        iterations += 1;
        let mut accepted = false;
        while step > 1e-16 {
            let mut cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            project(&mut cand, &lo, &hi);
            let f_cand = problem.objective_log_powers(&cand);
            let ascent: f64 = g.iter().zip(cand.iter().zip(&x)).map(|(gi, (c, xi))| gi * (c - xi)).sum();
            if f_cand >= f + 1e-4 * ascent && f_cand.is_finite() {
                x = cand;
                f = f_cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        g = problem.gradient_log_powers(&x);
        res = residual(&x, &g);
        step = (step * 2.0).min(1e6);
    }
    if !f.is_finite() {
        return Err(Error::NonFinite("NUM objective".into()));
    }
    let powers_w: Vec<f64> = x.iter().map(|v| math::exp(*v)).collect();
    Ok(NumSolution {
        powers_dbm: powers_w.iter().map(|p| math::watts_to_dbm(*p)).collect(),
        rates_bps: problem.rates_bps(&powers_w),
        powers_w,
        utility: f,
        kkt_residual: res,
        iterations,
        converged: res < tol,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexityReport {
    pub probes: usize,
    /// Largest `lambda g(x) + (1 - lambda) g(y) - g(lambda x + (1 - lambda) y)`.
    pub max_constraint_gap: f64,
    /// Largest amount by which a convex combination of feasible points
    /// exceeds its capacity bound.
    pub max_feasibility_violation: f64,
    /// Largest concavity defect of the objective in `r~` along a segment.
    pub max_objective_gap: f64,
    /// Probes with any defect above the tolerance.
    pub violations: usize,
    pub tolerance: f64,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Concavity defect of user `n`'s transformed capacity bound on the segment
/// from `x` to `y`; non-positive for a concave bound.
pub fn segment_gap(problem: &NumProblem, n: usize, x: &[f64], y: &[f64], lambda: f64) -> f64 {
    let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
    lambda * problem.capacity_log(n, x) + (1.0 - lambda) * problem.capacity_log(n, y) - problem.capacity_log(n, &z)
}

/// Random segment probes of the joint convexity of the transformed program.
pub fn check_convexity(problem: &NumProblem, probes: usize, rng: &mut SimRng) -> Result<ConvexityReport> {
    problem.validate()?;
    if probes == 0 {
        return Err(Error::InvalidConfig("at least one probe is required".into()));
    }
    let tol = 1e-9;
    let (lo, hi) = problem.log_bounds();
    let mut report = ConvexityReport { probes, tolerance: tol, ..Default::default() };
    report.max_constraint_gap = f64::NEG_INFINITY;
    report.max_feasibility_violation = f64::NEG_INFINITY;
    report.max_objective_gap = f64::NEG_INFINITY;
    let sample = |rng: &mut SimRng| -> Vec<f64> {
        lo.iter().zip(&hi).map(|(l, h)| if h > l { rng.gen_range(*l..*h) } else { *l }).collect()
    };
    for _ in 0..probes {
        let x = sample(rng);
        let y = sample(rng);
        let lambda: f64 = rng.gen_range(0.0..1.0);
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let mut rx = Vec::with_capacity(problem.num_users());
        let mut ry = Vec::with_capacity(problem.num_users());
        let mut worst = f64::NEG_INFINITY;
        for n in 0..problem.num_users() {
            let gx = problem.capacity_log(n, &x);
            let gy = problem.capacity_log(n, &y);
            let gz = problem.capacity_log(n, &z);
            let gap = lambda * gx + (1.0 - lambda) * gy - gz;
            // Feasible log-rates strictly inside the capacity region.
            let a = gx - rng.gen_range(0.0..2.0);
            let b = gy - rng.gen_range(0.0..2.0);
            let infeasible = lambda * a + (1.0 - lambda) * b - gz;
            rx.push(a);
            ry.push(b);
            report.max_constraint_gap = report.max_constraint_gap.max(gap);
            report.max_feasibility_violation = report.max_feasibility_violation.max(infeasible);
            worst = worst.max(gap).max(infeasible);
        }
        let rz: Vec<f64> = rx.iter().zip(&ry).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let obj_gap = lambda * problem.objective_log_rates(&rx) + (1.0 - lambda) * problem.objective_log_rates(&ry)
            - problem.objective_log_rates(&rz);
        report.max_objective_gap = report.max_objective_gap.max(obj_gap);
        worst = worst.max(obj_gap);
        if worst > tol {
            report.violations += 1;
        }
    }
    Ok(report)
}
