//! Per-user traffic: full buffer or bursty file downloads separated by
//! exponentially distributed reading times.

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrafficMode {
    FullBuffer,
    Bursty { file_size_bytes: f64, mean_reading_time_s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficConfig {
    pub mode: TrafficMode,
    /// Lower bound applied to measured throughputs before they enter a reward.
    pub rate_floor_bps: f64,
}

impl TrafficConfig {
    pub const DEFAULT_RATE_FLOOR_BPS: f64 = 1_000.0;

    pub fn full_buffer() -> Self {
        Self { mode: TrafficMode::FullBuffer, rate_floor_bps: Self::DEFAULT_RATE_FLOOR_BPS }
    }

    pub fn bursty(file_size_bytes: f64, mean_reading_time_s: f64) -> Self {
        Self {
            mode: TrafficMode::Bursty { file_size_bytes, mean_reading_time_s },
            rate_floor_bps: Self::DEFAULT_RATE_FLOOR_BPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TrafficMode::Bursty { file_size_bytes, mean_reading_time_s } = self.mode {
            if !(file_size_bytes > 0.0) {
                return Err(Error::NonPositive { what: "file size", value: file_size_bytes });
            }
            if !(mean_reading_time_s > 0.0) {
                return Err(Error::NonPositive { what: "mean reading time", value: mean_reading_time_s });
            }
        }
        if !(self.rate_floor_bps > 0.0) {
            return Err(Error::NonPositive { what: "rate floor", value: self.rate_floor_bps });
        }
        Ok(())
    }

    pub fn is_full_buffer(&self) -> bool {
        matches!(self.mode, TrafficMode::FullBuffer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserBuffer {
    /// Infinite for full-buffer users.
    pub backlog_bytes: f64,
    pub next_arrival_s: Option<f64>,
    pub bytes_served_total: f64,
    pub active_time_s: f64,
}

/// Counters captured at the start of a measurement window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BufferMark {
    pub bytes_served: f64,
    pub active_time_s: f64,
}

impl UserBuffer {
    /// Bursty users start in a reading period, so downloads are staggered.
    pub fn new(config: &TrafficConfig, rng: &mut SimRng) -> Self {
        match config.mode {
            TrafficMode::FullBuffer => {
                Self { backlog_bytes: f64::INFINITY, next_arrival_s: None, bytes_served_total: 0.0, active_time_s: 0.0 }
            }
            TrafficMode::Bursty { mean_reading_time_s, .. } => Self {
                backlog_bytes: 0.0,
                next_arrival_s: Some(rng::exponential(rng, mean_reading_time_s)),
                bytes_served_total: 0.0,
                active_time_s: 0.0,
            },
        }
    }

    pub fn is_backlogged(&self) -> bool {
        self.backlog_bytes > 0.0
    }

    /// Moves a pending file into the backlog once its arrival time is due.
    pub fn poll_arrival(&mut self, config: &TrafficConfig, now_s: f64) {
        if let TrafficMode::Bursty { file_size_bytes, .. } = config.mode {
            if let Some(t) = self.next_arrival_s {
                if t <= now_s {
                    self.backlog_bytes += file_size_bytes;
                    self.next_arrival_s = None;
                }
            }
        }
    }

    /// Accounts for one TTI of length `tti_s` starting at `now_s`, during
    /// which `served_bytes` were delivered.
    pub fn step_traffic(
        &mut self,
        config: &TrafficConfig,
        now_s: f64,
        tti_s: f64,
        served_bytes: f64,
        rng: &mut SimRng,
    ) -> Result<()> {
        const SLACK: f64 = 1e-6;
        if served_bytes > self.backlog_bytes + SLACK {
            return Err(Error::SchedulerOverrun { served: served_bytes, backlog: self.backlog_bytes });
        }
        if self.is_backlogged() {
            self.active_time_s += tti_s;
        }
        self.bytes_served_total += served_bytes;
        if let TrafficMode::Bursty { mean_reading_time_s, .. } = config.mode {
            self.backlog_bytes = (self.backlog_bytes - served_bytes).max(0.0);
            if self.backlog_bytes <= SLACK && self.next_arrival_s.is_none() {
                self.backlog_bytes = 0.0;
                self.next_arrival_s = Some(now_s + tti_s + rng::exponential(rng, mean_reading_time_s));
            }
        }
        Ok(())
    }

    pub fn mark(&self) -> BufferMark {
        BufferMark { bytes_served: self.bytes_served_total, active_time_s: self.active_time_s }
    }

    /// Throughput in bits/s since `mark`, over a window of `window_s`.
    pub fn throughput_since(&self, mark: &BufferMark, window_s: f64, config: &TrafficConfig) -> f64 {
        let bits = 8.0 * (self.bytes_served_total - mark.bytes_served);
        let active = self.active_time_s - mark.active_time_s;
        user_throughput(bits, window_s, active, config)
    }
}

/// Full buffer normalizes by the window; bursty by the time spent with a
/// nonzero backlog inside the window. The result never drops below the
/// configured floor.
pub fn user_throughput(bits_served: f64, window_s: f64, active_time_s: f64, config: &TrafficConfig) -> f64 {
    let duration = match config.mode {
        TrafficMode::FullBuffer => window_s,
        TrafficMode::Bursty { .. } => active_time_s,
    };
    if !(duration > 0.0) {
        return config.rate_floor_bps;
    }
    (bits_served / duration).max(config.rate_floor_bps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn full_buffer_never_drains() {
        let cfg = TrafficConfig::full_buffer();
        let mut rng = rng::stream(0, Stream::Traffic, 0);
        let mut b = UserBuffer::new(&cfg, &mut rng);
        b.step_traffic(&cfg, 0.0, 0.001, 1000.0, &mut rng).unwrap();
        assert_eq!(b.bytes_served_total, 1000.0);
        assert!(b.backlog_bytes.is_infinite());
        assert_eq!(b.active_time_s, 0.001);
    }

    #[test]
    fn bursty_schedules_next_file_when_drained() {
        let cfg = TrafficConfig::bursty(100.0, 0.1);
        let mut rng = rng::stream(0, Stream::Traffic, 0);
        let mut b = UserBuffer::new(&cfg, &mut rng);
        let first = b.next_arrival_s.unwrap();
        b.poll_arrival(&cfg, first);
        assert_eq!(b.backlog_bytes, 100.0);
        b.step_traffic(&cfg, first, 0.001, 100.0, &mut rng).unwrap();
        assert_eq!(b.backlog_bytes, 0.0);
        assert!(b.next_arrival_s.unwrap() > first);
        assert_eq!(b.bytes_served_total, 100.0);
    }

    #[test]
    fn overrun_is_rejected() {
        let cfg = TrafficConfig::bursty(100.0, 0.1);
        let mut rng = rng::stream(0, Stream::Traffic, 0);
        let mut b = UserBuffer::new(&cfg, &mut rng);
        b.backlog_bytes = 50.0;
        b.next_arrival_s = None;
        assert!(matches!(b.step_traffic(&cfg, 0.0, 0.001, 60.0, &mut rng), Err(Error::SchedulerOverrun { .. })));
    }

    #[test]
    fn bursty_offered_load_is_about_one_megabyte_per_second() {
        // 0.1 MB files, 100 ms mean reading time, a user served instantly.
        let cfg = TrafficConfig::bursty(1e5, 0.1);
        let mut rng = rng::stream(11, Stream::Traffic, 0);
        let mut b = UserBuffer::new(&cfg, &mut rng);
        let tti = 0.001;
        let ttis = 200_000;
        for k in 0..ttis {
            let now = k as f64 * tti;
            b.poll_arrival(&cfg, now);
            let served = b.backlog_bytes;
            b.step_traffic(&cfg, now, tti, served, &mut rng).unwrap();
        }
        let load = b.bytes_served_total / (ttis as f64 * tti);
        assert!((load - 1e6).abs() / 1e6 < 0.03, "load {load}");
    }

    #[test]
    fn bursty_arrivals_are_reproducible() {
        let cfg = TrafficConfig::bursty(1e5, 0.1);
        let run = || {
            let mut rng = rng::stream(5, Stream::Traffic, 2);
            let mut b = UserBuffer::new(&cfg, &mut rng);
            let mut arrivals = alloc::vec::Vec::new();
            for k in 0..5_000 {
                let now = k as f64 * 0.001;
                b.poll_arrival(&cfg, now);
                let served = b.backlog_bytes.min(3e4);
                b.step_traffic(&cfg, now, 0.001, served, &mut rng).unwrap();
                if let Some(t) = b.next_arrival_s {
                    arrivals.push(t.to_bits());
                }
            }
            arrivals
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn throughput_examples() {
        let full = TrafficConfig::full_buffer();
        assert_eq!(user_throughput(2e6, 1.0, 1.0, &full), 2e6);
        assert_eq!(user_throughput(0.0, 1.0, 1.0, &full), 1_000.0);
        let bursty = TrafficConfig::bursty(1e5, 0.1);
        assert!((user_throughput(0.8e6, 1.0, 0.4, &bursty) - 2e6).abs() < 1e-6);
        assert_eq!(user_throughput(0.0, 1.0, 0.0, &bursty), 1_000.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrafficConfig::bursty(0.0, 0.1).validate().is_err());
        assert!(TrafficConfig::bursty(1.0, 0.0).validate().is_err());
        assert!(TrafficConfig::full_buffer().validate().is_ok());
    }
}
