//! Frame, slot and airtime arithmetic on an integer microsecond clock.
//!
//! A transmission frame holds `num_slots` slot start positions spaced by
//! `slot_period`, followed by a trailing guard long enough for a training
//! packet started in the last slot to finish inside the frame.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Microseconds per second.
pub const TICKS_PER_SECOND: u64 = 1_000_000;

/// An instant on the simulation clock, in microseconds since start.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

/// A span of simulated time, in microseconds.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimDuration(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_SECOND as f64
    }

    /// Time elapsed since `earlier`. Saturates at zero.
    pub fn since(self, earlier: SimTime) -> SimDuration {
        SimDuration(self.0.saturating_sub(earlier.0))
    }
}

impl SimDuration {
    pub const ZERO: SimDuration = SimDuration(0);

    pub fn from_micros(us: u64) -> Self {
        SimDuration(us)
    }

    pub fn from_millis(ms: u64) -> Self {
        SimDuration(ms * 1_000)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_SECOND as f64
    }
}

impl Add<SimDuration> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimDuration) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign<SimDuration> for SimTime {
    fn add_assign(&mut self, rhs: SimDuration) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimDuration;
    fn sub(self, rhs: SimTime) -> SimDuration {
        SimDuration(self.0 - rhs.0)
    }
}

impl Add for SimDuration {
    type Output = SimDuration;
    fn add(self, rhs: SimDuration) -> SimDuration {
        SimDuration(self.0 + rhs.0)
    }
}

impl Mul<u64> for SimDuration {
    type Output = SimDuration;
    fn mul(self, rhs: u64) -> SimDuration {
        SimDuration(self.0 * rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

impl fmt::Display for SimDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// How CSMA/CA nodes schedule new packets and retries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsmaPacing {
    /// One packet per node per transmission frame; a busy channel postpones
    /// the next attempt to the following frame.
    Frame,
    /// Unpaced contention: a new packet is loaded as soon as the previous one
    /// leaves, and a busy channel triggers an immediate new backoff.
    Saturated,
}

/// Every timing, learning and traffic parameter of a scenario.
///
/// Defaults reproduce the four-node testbed setup. Every field is optional in
/// a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_slots: usize,
    #[serde(rename = "slot_period_us")]
    pub slot_period: SimDuration,
    #[serde(rename = "frame_period_us")]
    pub frame_period: SimDuration,
    /// Bits per second.
    pub data_rate: u64,
    pub training_packet_bytes: u32,
    /// Payload used by converged TDMA agents and by CSMA/CA nodes.
    pub data_packet_bytes: u32,
    pub max_retransmissions: u32,
    pub gamma: f64,
    pub alpha: f64,
    pub eps_max: f64,
    pub eps_min: f64,
    pub decay_rate: f64,
    pub m_window: usize,
    pub num_nodes: usize,
    #[serde(rename = "sense_jitter_max_us")]
    pub sense_jitter_max: SimDuration,
    /// Node `k` joins at `k * join_spacing`.
    #[serde(rename = "join_spacing_us")]
    pub join_spacing: SimDuration,
    pub rng_seed: u64,
    pub csma_min_be: u32,
    pub csma_max_be: u32,
    pub csma_max_backoffs: u32,
    #[serde(rename = "csma_unit_backoff_us")]
    pub csma_unit_backoff: SimDuration,
    pub csma_pacing: CsmaPacing,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_slots: 16,
            slot_period: SimDuration(4_600),
            frame_period: SimDuration(100_000),
            data_rate: 115_200,
            training_packet_bytes: 180,
            data_packet_bytes: 180,
            max_retransmissions: 5,
            gamma: 0.99,
            alpha: 0.2,
            eps_max: 1.0,
            eps_min: 0.05,
            decay_rate: 0.01,
            m_window: 7,
            num_nodes: 4,
            sense_jitter_max: SimDuration(50),
            join_spacing: SimDuration(10_000),
            rng_seed: 0,
            csma_min_be: 3,
            csma_max_be: 5,
            csma_max_backoffs: 4,
            csma_unit_backoff: SimDuration(1_000),
            csma_pacing: CsmaPacing::Frame,
        }
    }
}

impl ScenarioConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn training_airtime(&self) -> SimDuration {
        airtime(self.training_packet_bytes, self.data_rate).unwrap_or(SimDuration::ZERO)
    }

    pub fn data_airtime(&self) -> SimDuration {
        airtime(self.data_packet_bytes, self.data_rate).unwrap_or(SimDuration::ZERO)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimebaseError {
    #[error("slot index {slot} out of range (frame has {num_slots} slots)")]
    SlotOutOfRange { slot: usize, num_slots: usize },
    #[error("airtime needs a positive packet size and data rate (got {bytes} B at {rate} b/s)")]
    NonPositiveAirtimeInput { bytes: u32, rate: u64 },
}

/// One violated [`ScenarioConfig`] invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigViolation {
    GuardTime { needed: SimDuration, frame_period: SimDuration },
    AlphaRange(f64),
    GammaRange(f64),
    EpsilonRange { eps_min: f64, eps_max: f64 },
    DecayRange(f64),
    MWindow(usize),
    NoSlots,
    NoNodes,
    ZeroDataRate,
    EmptyPacket,
    JitterTooLarge { jitter: SimDuration, slot_period: SimDuration },
    JoinSchedule { last_join: SimDuration, frame_period: SimDuration },
    BackoffExponents { min_be: u32, max_be: u32 },
    ZeroBackoffUnit,
}

impl ConfigViolation {
    /// Short stable name of the violated invariant.
    pub fn name(&self) -> &'static str {
        match self {
            ConfigViolation::GuardTime { .. } => "guard time",
            ConfigViolation::AlphaRange(_) => "alpha range",
            ConfigViolation::GammaRange(_) => "gamma range",
            ConfigViolation::EpsilonRange { .. } => "epsilon range",
            ConfigViolation::DecayRange(_) => "decay rate range",
            ConfigViolation::MWindow(_) => "convergence window",
            ConfigViolation::NoSlots => "slot count",
            ConfigViolation::NoNodes => "node count",
            ConfigViolation::ZeroDataRate => "data rate",
            ConfigViolation::EmptyPacket => "packet size",
            ConfigViolation::JitterTooLarge { .. } => "sense jitter",
            ConfigViolation::JoinSchedule { .. } => "join schedule",
            ConfigViolation::BackoffExponents { .. } => "backoff exponents",
            ConfigViolation::ZeroBackoffUnit => "backoff unit",
        }
    }
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.name())?;
        match self {
            ConfigViolation::GuardTime { needed, frame_period } => write!(
                f,
                "slots plus training airtime need {needed} but the frame is {frame_period}"
            ),
            ConfigViolation::AlphaRange(a) => write!(f, "alpha = {a}, need 0 < alpha <= 1"),
            ConfigViolation::GammaRange(g) => write!(f, "gamma = {g}, need 0 < gamma < 1"),
            ConfigViolation::EpsilonRange { eps_min, eps_max } => write!(
                f,
                "eps_min = {eps_min}, eps_max = {eps_max}, need 0 <= eps_min <= eps_max <= 1"
            ),
            ConfigViolation::DecayRange(d) => write!(f, "decay_rate = {d}, need 0 <= d < 1"),
            ConfigViolation::MWindow(m) => write!(f, "m_window = {m}, need m_window >= 3"),
            ConfigViolation::NoSlots => write!(f, "num_slots must be positive"),
            ConfigViolation::NoNodes => write!(f, "num_nodes must be positive"),
            ConfigViolation::ZeroDataRate => write!(f, "data_rate must be positive"),
            ConfigViolation::EmptyPacket => write!(f, "packet sizes must be positive"),
            ConfigViolation::JitterTooLarge { jitter, slot_period } => write!(
                f,
                "sense_jitter_max = {jitter} must be below slot_period = {slot_period}"
            ),
            ConfigViolation::JoinSchedule { last_join, frame_period } => write!(
                f,
                "last node joins at {last_join}, must be inside the first frame ({frame_period})"
            ),
            ConfigViolation::BackoffExponents { min_be, max_be } => write!(
                f,
                "csma_min_be = {min_be}, csma_max_be = {max_be}, need min <= max <= 20"
            ),
            ConfigViolation::ZeroBackoffUnit => write!(f, "csma_unit_backoff must be positive"),
        }
    }
}

/// Offset of a slot's start from its frame boundary.
pub fn slot_start_offset(
    slot_index: usize,
    cfg: &ScenarioConfig,
) -> Result<SimDuration, TimebaseError> {
    if slot_index >= cfg.num_slots {
        return Err(TimebaseError::SlotOutOfRange {
            slot: slot_index,
            num_slots: cfg.num_slots,
        });
    }
    Ok(cfg.slot_period * slot_index as u64)
}

/// Time on air of `size_bytes` at `data_rate` bits/s, rounded up to the tick.
pub fn airtime(size_bytes: u32, data_rate: u64) -> Result<SimDuration, TimebaseError> {
    if size_bytes == 0 || data_rate == 0 {
        return Err(TimebaseError::NonPositiveAirtimeInput {
            bytes: size_bytes,
            rate: data_rate,
        });
    }
    let bit_ticks = u64::from(size_bytes) * 8 * TICKS_PER_SECOND;
    Ok(SimDuration(bit_ticks.div_ceil(data_rate)))
}

/// Checks every config invariant and reports all of the violated ones.
pub fn validate_config(cfg: &ScenarioConfig) -> Result<(), Vec<ConfigViolation>> {
    let mut v = Vec::new();

    if cfg.num_slots == 0 {
        v.push(ConfigViolation::NoSlots);
    }
    if cfg.num_nodes == 0 {
        v.push(ConfigViolation::NoNodes);
    }
    if cfg.data_rate == 0 {
        v.push(ConfigViolation::ZeroDataRate);
    }
    if cfg.training_packet_bytes == 0 || cfg.data_packet_bytes == 0 {
        v.push(ConfigViolation::EmptyPacket);
    }
    if let Ok(train) = airtime(cfg.training_packet_bytes, cfg.data_rate) {
        let needed = cfg.slot_period * cfg.num_slots as u64 + train;
        if needed > cfg.frame_period {
            v.push(ConfigViolation::GuardTime {
                needed,
                frame_period: cfg.frame_period,
            });
        }
    }
    // NaN fails every comparison below, so it is reported as out of range.
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        v.push(ConfigViolation::AlphaRange(cfg.alpha));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        v.push(ConfigViolation::GammaRange(cfg.gamma));
    }
    if !(cfg.eps_min >= 0.0 && cfg.eps_min <= cfg.eps_max && cfg.eps_max <= 1.0) {
        v.push(ConfigViolation::EpsilonRange {
            eps_min: cfg.eps_min,
            eps_max: cfg.eps_max,
        });
    }
    if !(cfg.decay_rate >= 0.0 && cfg.decay_rate < 1.0) {
        v.push(ConfigViolation::DecayRange(cfg.decay_rate));
    }
    if cfg.m_window < 3 {
        v.push(ConfigViolation::MWindow(cfg.m_window));
    }
    if cfg.sense_jitter_max >= cfg.slot_period {
        v.push(ConfigViolation::JitterTooLarge {
            jitter: cfg.sense_jitter_max,
            slot_period: cfg.slot_period,
        });
    }
    let last_join = cfg.join_spacing * cfg.num_nodes.saturating_sub(1) as u64;
    if last_join >= cfg.frame_period {
        v.push(ConfigViolation::JoinSchedule {
            last_join,
            frame_period: cfg.frame_period,
        });
    }
    if cfg.csma_min_be > cfg.csma_max_be || cfg.csma_max_be > 20 {
        v.push(ConfigViolation::BackoffExponents {
            min_be: cfg.csma_min_be,
            max_be: cfg.csma_max_be,
        });
    }
    if cfg.csma_unit_backoff == SimDuration::ZERO {
        v.push(ConfigViolation::ZeroBackoffUnit);
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Splits a time measured from a frame origin into frame index and offset.
pub fn frame_and_iteration_of(t: SimTime, cfg: &ScenarioConfig) -> (u64, SimDuration) {
    let fp = cfg.frame_period.0;
    (t.0 / fp, SimDuration(t.0 % fp))
}
