//! Static multi-cell downlink radio model.
//!
//! Gains are large-scale only (distance-law pathloss plus log-normal
//! shadowing) and stay fixed for the lifetime of a drop. Every cell spreads
//! its power budget uniformly across its scheduled resources, so a user's
//! SINR only depends on the per-cell power vector.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        math::sqrt(dx * dx + dy * dy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub position: Point,
    pub power_dbm: f64,
    pub max_power_dbm: f64,
    pub min_power_dbm: f64,
    pub bandwidth_hz: f64,
}

impl Cell {
    pub fn clamp_power(&self, dbm: f64) -> f64 {
        dbm.clamp(self.min_power_dbm, self.max_power_dbm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub id: usize,
    pub serving_cell: usize,
    pub position: Point,
    /// Linear gain towards every cell, indexed by cell id.
    pub gains: Vec<f64>,
}

impl User {
    pub fn serving_gain(&self) -> f64 {
        self.gains[self.serving_cell]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db_per_decade: f64,
    pub shadowing_sigma_db: f64,
    /// Noise over the full band, in watts.
    pub noise_power_w: f64,
}

impl ChannelModel {
    pub const DEFAULT_INTERCEPT_DB: f64 = 128.1;
    pub const DEFAULT_SLOPE_DB: f64 = 37.6;
    pub const DEFAULT_SHADOWING_DB: f64 = 8.0;
    pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
    pub const DEFAULT_NOISE_FIGURE_DB: f64 = 9.0;

    /// Macro-cell defaults with thermal noise over `bandwidth_hz` plus the
    /// given receiver noise figure.
    pub fn macro_cell(bandwidth_hz: f64, noise_figure_db: f64) -> Self {
        Self {
            pathloss_intercept_db: Self::DEFAULT_INTERCEPT_DB,
            pathloss_slope_db_per_decade: Self::DEFAULT_SLOPE_DB,
            shadowing_sigma_db: Self::DEFAULT_SHADOWING_DB,
            noise_power_w: thermal_noise_w(bandwidth_hz, noise_figure_db),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_power_w > 0.0) {
            return Err(Error::NonPositive { what: "noise power", value: self.noise_power_w });
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::InvalidConfig("shadowing sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn gain_db(&self, user_pos: Point, cell_pos: Point, shadow_db: f64) -> f64 {
        let d_km = (user_pos.distance(&cell_pos) / 1000.0).max(0.001);
        -(self.pathloss_intercept_db + self.pathloss_slope_db_per_decade * math::log10(d_km)) + shadow_db
    }

    /// Linear large-scale gain; distances below 1 m are floored.
    pub fn compute_gain(&self, user_pos: Point, cell_pos: Point, shadow_db: f64) -> f64 {
        math::db_to_linear(self.gain_db(user_pos, cell_pos, shadow_db))
    }
}

pub fn thermal_noise_w(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    math::dbm_to_watts(ChannelModel::THERMAL_NOISE_DBM_PER_HZ + math::linear_to_db(bandwidth_hz) + noise_figure_db)
}

/// Per-cell linear power budgets in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector(pub Vec<f64>);

impl PowerVector {
    pub fn from_dbm(dbm: &[f64]) -> Self {
        Self(dbm.iter().map(|&p| math::dbm_to_watts(p)).collect())
    }

    pub fn to_dbm(&self) -> Vec<f64> {
        self.0.iter().map(|&p| math::watts_to_dbm(p)).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Total interference power at `user`: every non-serving cell's received power.
pub fn interference(user: &User, powers: &PowerVector) -> f64 {
    user.gains
        .iter()
        .zip(powers.as_slice())
        .enumerate()
        .filter(|(c, _)| *c != user.serving_cell)
        .map(|(_, (g, p))| g * p)
        .sum()
}

pub fn sinr(user: &User, powers: &PowerVector, channel: &ChannelModel) -> f64 {
    let signal = user.serving_gain() * powers.0[user.serving_cell];
    signal / (channel.noise_power_w + interference(user, powers))
}

pub fn user_bandwidth(cell: &Cell, num_served: usize) -> Result<f64> {
    if num_served == 0 {
        return Err(Error::EmptyCell { cell: cell.id });
    }
    Ok(cell.bandwidth_hz / num_served as f64)
}

/// Shannon bound in bits/s.
pub fn shannon_rate(sinr_linear: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * math::ln_1p(sinr_linear) / math::LN_2
}

/// One TTI worth of cell-average measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSample {
    /// Mean serving received power over the cell's users (RSRP proxy), W.
    pub rsrp_w: f64,
    /// Mean total interference over the cell's users, W.
    pub interference_w: f64,
    /// Mean received power from each cell (own cell entry is zero), W.
    pub interference_per_cell_w: Vec<f64>,
}

pub fn cell_measurements(cell: &Cell, users: &[User], powers: &PowerVector) -> Result<MeasurementSample> {
    let mut count = 0usize;
    let mut rsrp = 0.0;
    let mut interf = 0.0;
    let mut per_cell = alloc::vec![0.0; powers.len()];
    for user in users.iter().filter(|u| u.serving_cell == cell.id) {
        count += 1;
        rsrp += user.serving_gain() * powers.0[cell.id];
        for (c, (g, p)) in user.gains.iter().zip(powers.as_slice()).enumerate() {
            if c != cell.id {
                let rx = g * p;
                interf += rx;
                per_cell[c] += rx;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyCell { cell: cell.id });
    }
    let n = count as f64;
    per_cell.iter_mut().for_each(|v| *v /= n);
    Ok(MeasurementSample { rsrp_w: rsrp / n, interference_w: interf / n, interference_per_cell_w: per_cell })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Cells on the x-axis, one inter-site distance apart.
    Line,
    /// Up to three cells on the vertices of an equilateral triangle.
    Triangle,
}

/// Geometry of a drop: site layout, coverage radius and user counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DropGeometry {
    pub layout: Layout,
    pub inter_site_distance_m: f64,
    pub users_per_cell: Vec<usize>,
}

impl DropGeometry {
    pub fn cell_positions(&self) -> Result<Vec<Point>> {
        let c = self.users_per_cell.len();
        let isd = self.inter_site_distance_m;
        match self.layout {
            Layout::Line => Ok((0..c).map(|i| Point::new(i as f64 * isd, 0.0)).collect()),
            Layout::Triangle => {
                if c > 3 {
                    return Err(Error::InvalidConfig("triangle layout holds at most 3 cells".into()));
                }
                let h = isd * math::sqrt(3.0) / 2.0;
                let sites = [Point::new(0.0, 0.0), Point::new(isd, 0.0), Point::new(isd / 2.0, h)];
                Ok(sites[..c].to_vec())
            }
        }
    }
}

/// Splits `total` users across cells proportionally to `loads` using
/// largest-remainder rounding, so the counts always sum to `total`.
pub fn users_per_cell(total: usize, loads: &[f64]) -> Vec<usize> {
    let sum: f64 = loads.iter().sum();
    let exact: Vec<f64> = loads.iter().map(|l| total as f64 * l / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| math::floor(*x + 1e-9) as usize).collect();
    let mut remaining = total.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..loads.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[i] += 1;
        remaining -= 1;
    }
    counts
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// The simulated world of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub cells: Vec<Cell>,
    pub users: Vec<User>,
    pub channel: ChannelModel,
}

/// Power and bandwidth settings shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRadio {
    pub bandwidth_hz: f64,
    pub default_power_dbm: f64,
    pub min_power_dbm: f64,
    pub max_power_dbm: f64,
}

impl Network {
    /// Draws user positions (uniform in each cell's disc of radius ISD/2)
    /// from `placement` and per-link shadowing from `shadowing`, keeping only
    /// draws whose strongest link is the cell being filled.
    pub fn generate(
        geometry: &DropGeometry,
        radio: CellRadio,
        channel: ChannelModel,
        placement: &mut SimRng,
        shadowing: &mut SimRng,
    ) -> Result<Self> {
        channel.validate()?;
        if !(radio.bandwidth_hz > 0.0) {
            return Err(Error::NonPositive { what: "bandwidth", value: radio.bandwidth_hz });
        }
        if !(radio.min_power_dbm <= radio.default_power_dbm && radio.default_power_dbm <= radio.max_power_dbm) {
            return Err(Error::InvalidConfig("power bounds must satisfy min <= default <= max".into()));
        }
        let sites = geometry.cell_positions()?;
        let cells: Vec<Cell> = sites
            .iter()
            .enumerate()
            .map(|(id, &position)| Cell {
                id,
                position,
                power_dbm: radio.default_power_dbm,
                max_power_dbm: radio.max_power_dbm,
                min_power_dbm: radio.min_power_dbm,
                bandwidth_hz: radio.bandwidth_hz,
            })
            .collect();
        let radius = geometry.inter_site_distance_m / 2.0;
        let mut users = Vec::new();
        for (c, &count) in geometry.users_per_cell.iter().enumerate() {
            for _ in 0..count {
                // Redraw until the cell is the user's strongest server, so a
                // cell's users are the ones it would actually cover.
                let mut attempts = 0;
                let (position, gains) = loop {
                    let r = radius * math::sqrt(rand::Rng::gen::<f64>(placement));
                    let theta = 2.0 * core::f64::consts::PI * rand::Rng::gen::<f64>(placement);
                    let position = Point::new(sites[c].x + r * math::cos(theta), sites[c].y + r * math::sin(theta));
                    let gains: Vec<f64> = cells
                        .iter()
                        .map(|cell| {
                            let shadow = rng::normal(shadowing, 0.0, channel.shadowing_sigma_db);
                            channel.compute_gain(position, cell.position, shadow)
                        })
                        .collect();
                    if gains.iter().all(|g| *g <= gains[c]) {
                        break (position, gains);
                    }
                    attempts += 1;
                    if attempts == MAX_PLACEMENT_ATTEMPTS {
                        return Err(Error::InvalidConfig(alloc::format!(
                            "cell {c} is not the strongest server anywhere in its coverage disc"
                        )));
                    }
                };
                users.push(User { id: users.len(), serving_cell: c, position, gains });
            }
        }
        Ok(Self { cells, users, channel })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn users_in(&self, cell: usize) -> impl Iterator<Item = &User> {
        self.users.iter().filter(move |u| u.serving_cell == cell)
    }

    pub fn users_per_cell(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.cells.len()];
        for u in &self.users {
            counts[u.serving_cell] += 1;
        }
        counts
    }

    pub fn sinrs(&self, powers: &PowerVector) -> Vec<f64> {
        self.users.iter().map(|u| sinr(u, powers, &self.channel)).collect()
    }

    /// Per-user Shannon rates (bits/s) with an equal bandwidth share among the
    /// users of each cell.
    pub fn steady_state_rates(&self, powers: &PowerVector) -> Vec<f64> {
        let counts = self.users_per_cell();
        self.users
            .iter()
            .map(|u| {
                let bw = self.cells[u.serving_cell].bandwidth_hz / counts[u.serving_cell] as f64;
                shannon_rate(sinr(u, powers, &self.channel), bw)
            })
            .collect()
    }
}
