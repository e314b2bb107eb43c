//! Ideal single-hop broadcast medium.
//!
//! Every node hears every other node, there are no bit errors, and two
//! transmissions whose airtime intervals overlap are both lost. Intervals are
//! half-open: a packet on air over `[start, start + duration)` no longer
//! occupies the channel at `start + duration`.

use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timebase::{airtime, ScenarioConfig, SimDuration, SimTime, TimebaseError};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Delivered,
    Collided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelStatus {
    Busy,
    Idle,
}

/// One transmission attempt that made it onto the air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionRecord {
    pub sender: NodeId,
    pub start: SimTime,
    pub duration: SimDuration,
    pub payload_bytes: u32,
    pub outcome: Outcome,
}

impl TransmissionRecord {
    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }

    pub fn covers(&self, t: SimTime) -> bool {
        self.start <= t && t < self.end()
    }

    pub fn overlaps(&self, other: &TransmissionRecord) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChannelError {
    #[error("node {0} sensed the channel while transmitting")]
    HalfDuplex(NodeId),
    #[error("node {0} is already transmitting")]
    AlreadyTransmitting(NodeId),
    #[error("node {0} has no transmission in flight")]
    NotTransmitting(NodeId),
    #[error(transparent)]
    Airtime(#[from] TimebaseError),
}

#[derive(Debug, Clone, Default)]
pub struct ChannelState {
    data_rate: u64,
    active: Vec<TransmissionRecord>,
    log: Vec<TransmissionRecord>,
}

impl ChannelState {
    pub fn new(data_rate: u64) -> Self {
        ChannelState {
            data_rate,
            active: Vec::new(),
            log: Vec::new(),
        }
    }

    /// Carrier sense at `t` as seen by `observer`.
    pub fn sense(&self, t: SimTime, observer: NodeId) -> Result<ChannelStatus, ChannelError> {
        let mut busy = false;
        for rec in self.active.iter().filter(|r| r.covers(t)) {
            if rec.sender == observer {
                return Err(ChannelError::HalfDuplex(observer));
            }
            busy = true;
        }
        Ok(if busy {
            ChannelStatus::Busy
        } else {
            ChannelStatus::Idle
        })
    }

    /// Puts a packet on the air at `t`. Any in-flight packet covering `t`
    /// collides with it; the returned record reflects the outcome known so far.
    pub fn begin_transmission(
        &mut self,
        sender: NodeId,
        t: SimTime,
        bytes: u32,
    ) -> Result<TransmissionRecord, ChannelError> {
        if self.active.iter().any(|r| r.sender == sender && r.end() > t) {
            return Err(ChannelError::AlreadyTransmitting(sender));
        }
        let mut rec = TransmissionRecord {
            sender,
            start: t,
            duration: airtime(bytes, self.data_rate)?,
            payload_bytes: bytes,
            outcome: Outcome::Delivered,
        };
        for other in self.active.iter_mut().filter(|r| r.covers(t)) {
            other.outcome = Outcome::Collided;
            rec.outcome = Outcome::Collided;
        }
        self.active.push(rec);
        Ok(rec)
    }

    /// Moves `sender`'s in-flight record to the log with its final outcome.
    pub fn end_transmission(&mut self, sender: NodeId) -> Result<TransmissionRecord, ChannelError> {
        let idx = self
            .active
            .iter()
            .position(|r| r.sender == sender)
            .ok_or(ChannelError::NotTransmitting(sender))?;
        let rec = self.active.swap_remove(idx);
        // keep the log ordered by (start, sender)
        let key = (rec.start, rec.sender);
        let pos = self
            .log
            .iter()
            .rposition(|r| (r.start, r.sender) <= key)
            .map_or(0, |p| p + 1);
        self.log.insert(pos, rec);
        Ok(rec)
    }

    pub fn active(&self) -> &[TransmissionRecord] {
        &self.active
    }

    pub fn log(&self) -> &[TransmissionRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<TransmissionRecord> {
        self.log
    }
}

/// Per-attempt sense offset, uniform over `[0, sense_jitter_max]` ticks.
pub fn sense_jitter<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> SimDuration {
    SimDuration(rng.gen_range(0..=cfg.sense_jitter_max.0))
}

#[derive(Serialize)]
struct LogRow {
    sender: u32,
    start_us: u64,
    duration_us: u64,
    bytes: u32,
    outcome: Outcome,
}

/// Writes `sender,start_us,duration_us,bytes,outcome` rows.
pub fn write_log_csv<W: Write>(records: &[TransmissionRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(LogRow {
            sender: r.sender.0,
            start_us: r.start.0,
            duration_us: r.duration.0,
            bytes: r.payload_bytes,
            outcome: r.outcome,
        })?;
    }
    w.flush()?;
    Ok(())
}
