//! Unslotted, ACK-free CSMA/CA baseline.
//!
//! A node draws a random backoff of `[0, 2^BE - 1]` unit periods, senses the
//! channel when it expires, and transmits the whole packet if the channel is
//! idle. A busy channel raises the backoff exponent; too many busy senses
//! drop the packet. No acknowledgements exist, so a lost packet is only seen
//! as lost at the sink.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelError, ChannelState, ChannelStatus, NodeId, Outcome, TransmissionRecord};
use crate::timebase::{CsmaPacing, ScenarioConfig, SimDuration, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsmaParams {
    pub min_be: u32,
    pub max_be: u32,
    pub max_backoffs: u32,
    pub unit_backoff: SimDuration,
    pub pacing: CsmaPacing,
}

pub fn csma_defaults() -> CsmaParams {
    CsmaParams::from(&ScenarioConfig::default())
}

impl From<&ScenarioConfig> for CsmaParams {
    fn from(cfg: &ScenarioConfig) -> Self {
        CsmaParams {
            min_be: cfg.csma_min_be,
            max_be: cfg.csma_max_be,
            max_backoffs: cfg.csma_max_backoffs,
            unit_backoff: cfg.csma_unit_backoff,
            pacing: cfg.csma_pacing,
        }
    }
}

impl CsmaParams {
    /// Longest backoff drawable at exponent `be`.
    pub fn max_backoff(&self, be: u32) -> SimDuration {
        self.unit_backoff * ((1u64 << be) - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadPacket {
    pub bytes: u32,
    pub generated_at: SimTime,
}

/// What happened at a backoff expiry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsmaAction {
    Transmit,
    /// Busy; the packet stays and a new backoff follows.
    Retry,
    /// Busy too many times; the head packet was discarded.
    Drop(HeadPacket),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsmaState {
    pub node: NodeId,
    pub backoff_exponent: u32,
    pub remaining_backoff: SimDuration,
    pub attempts: u32,
    pub head_packet: Option<HeadPacket>,
}

impl CsmaState {
    pub fn new(node: NodeId, params: &CsmaParams) -> Self {
        CsmaState {
            node,
            backoff_exponent: params.min_be,
            remaining_backoff: SimDuration::ZERO,
            attempts: 0,
            head_packet: None,
        }
    }

    pub fn load_packet(&mut self, bytes: u32, t: SimTime) -> HeadPacket {
        let p = HeadPacket {
            bytes,
            generated_at: t,
        };
        self.head_packet = Some(p);
        p
    }

    /// Draws a backoff for the current exponent.
    pub fn draw_backoff<R: Rng + ?Sized>(&mut self, rng: &mut R, params: &CsmaParams) -> SimDuration {
        let units = rng.gen_range(0..(1u64 << self.backoff_exponent));
        self.remaining_backoff = params.unit_backoff * units;
        self.remaining_backoff
    }

    fn escalate(&mut self, params: &CsmaParams) {
        self.backoff_exponent = (self.backoff_exponent + 1).min(params.max_be);
    }

    /// Applies the carrier-sense result taken when the backoff expired.
    pub fn on_backoff_expiry(&mut self, status: ChannelStatus, params: &CsmaParams) -> CsmaAction {
        self.remaining_backoff = SimDuration::ZERO;
        match status {
            ChannelStatus::Idle => CsmaAction::Transmit,
            ChannelStatus::Busy => {
                self.escalate(params);
                self.attempts += 1;
                if self.attempts > params.max_backoffs {
                    self.backoff_exponent = params.min_be;
                    self.attempts = 0;
                    let dropped = self
                        .head_packet
                        .take()
                        .expect("backoff expiry without a head packet");
                    CsmaAction::Drop(dropped)
                } else {
                    CsmaAction::Retry
                }
            }
        }
    }

    /// The head packet left the air. A collision widens the contention window
    /// for the next packet; the lost one is not retried.
    pub fn on_tx_end(&mut self, outcome: Outcome, params: &CsmaParams) -> Option<HeadPacket> {
        self.attempts = 0;
        match outcome {
            Outcome::Delivered => self.backoff_exponent = params.min_be,
            Outcome::Collided => self.escalate(params),
        }
        self.head_packet.take()
    }
}

/// One backoff-sense-act cycle starting at `now`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CsmaStep {
    Transmit { at: SimTime, record: TransmissionRecord },
    Defer { at: SimTime },
    Drop { at: SimTime, packet: HeadPacket },
}

/// Synchronous version of the contention cycle: draw, wait, sense, act.
/// A transmitted packet is left in flight on `channel`.
pub fn csma_step<R: Rng + ?Sized>(
    state: &mut CsmaState,
    channel: &mut ChannelState,
    now: SimTime,
    rng: &mut R,
    params: &CsmaParams,
) -> Result<CsmaStep, ChannelError> {
    let at = now + state.draw_backoff(rng, params);
    let status = channel.sense(at, state.node)?;
    Ok(match state.on_backoff_expiry(status, params) {
        CsmaAction::Transmit => {
            let bytes = state
                .head_packet
                .map(|p| p.bytes)
                .expect("contention without a head packet");
            let record = channel.begin_transmission(state.node, at, bytes)?;
            CsmaStep::Transmit { at, record }
        }
        CsmaAction::Retry => CsmaStep::Defer { at },
        CsmaAction::Drop(packet) => CsmaStep::Drop { at, packet },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults() {
        let p = csma_defaults();
        assert_eq!((p.min_be, p.max_be, p.max_backoffs), (3, 5, 4));
        assert_eq!(p.unit_backoff, SimDuration::from_millis(1));
        assert_eq!(p.max_backoff(p.max_be), SimDuration::from_millis(31));
    }

    #[test]
    fn be3_backoffs_cover_zero_to_seven() {
        let p = csma_defaults();
        let mut s = CsmaState::new(NodeId(0), &p);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = [false; 8];
        for _ in 0..2_000 {
            let units = s.draw_backoff(&mut rng, &p).0 / 1_000;
            assert!(units <= 7);
            seen[units as usize] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn zero_exponent_senses_immediately() {
        let p = CsmaParams {
            min_be: 0,
            max_be: 0,
            ..csma_defaults()
        };
        let mut s = CsmaState::new(NodeId(0), &p);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| s.draw_backoff(&mut rng, &p) == SimDuration::ZERO));
        s.on_backoff_expiry(ChannelStatus::Busy, &p);
        assert_eq!(s.backoff_exponent, 0);
    }

    #[test]
    fn idle_channel_delivers_after_backoff_plus_airtime() {
        let p = csma_defaults();
        let mut ch = ChannelState::new(115_200);
        let mut s = CsmaState::new(NodeId(0), &p);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let now = SimTime::from_millis(100);
        s.load_packet(180, now);
        let CsmaStep::Transmit { at, record } = csma_step(&mut s, &mut ch, now, &mut rng, &p).unwrap()
        else {
            panic!("idle channel must transmit");
        };
        let done = ch.end_transmission(NodeId(0)).unwrap();
        assert_eq!(done.outcome, Outcome::Delivered);
        let delay = record.end().since(now);
        assert_eq!(delay, (at - now) + SimDuration(12_500));
    }

    #[test]
    fn equal_expiry_collides_and_both_escalate() {
        let p = csma_defaults();
        let mut ch = ChannelState::new(115_200);
        let t = SimTime::from_millis(3);
        let mut nodes = [CsmaState::new(NodeId(0), &p), CsmaState::new(NodeId(1), &p)];
        for n in nodes.iter_mut() {
            n.load_packet(180, SimTime::ZERO);
        }
        // both sense before either starts, as at a shared expiry instant
        let statuses: Vec<_> = nodes.iter().map(|n| ch.sense(t, n.node).unwrap()).collect();
        for (n, st) in nodes.iter_mut().zip(statuses) {
            assert_eq!(n.on_backoff_expiry(st, &p), CsmaAction::Transmit);
            ch.begin_transmission(n.node, t, 180).unwrap();
        }
        for n in nodes.iter_mut() {
            let rec = ch.end_transmission(n.node).unwrap();
            assert_eq!(rec.outcome, Outcome::Collided);
            n.on_tx_end(rec.outcome, &p);
            assert_eq!(n.backoff_exponent, 4);
        }
    }

    #[test]
    fn busy_senses_escalate_then_drop() {
        let p = csma_defaults();
        let mut s = CsmaState::new(NodeId(0), &p);
        s.load_packet(180, SimTime::ZERO);
        let mut bes = Vec::new();
        for _ in 0..4 {
            assert_eq!(s.on_backoff_expiry(ChannelStatus::Busy, &p), CsmaAction::Retry);
            bes.push(s.backoff_exponent);
        }
        assert_eq!(bes, [4, 5, 5, 5]);
        assert!(matches!(
            s.on_backoff_expiry(ChannelStatus::Busy, &p),
            CsmaAction::Drop(HeadPacket { bytes: 180, .. })
        ));
        assert_eq!((s.backoff_exponent, s.attempts, s.head_packet), (3, 0, None));
    }

    proptest! {
        #[test]
        fn backoff_within_window(seed in any::<u64>(), busy in proptest::collection::vec(any::<bool>(), 1..40)) {
            let p = csma_defaults();
            let mut s = CsmaState::new(NodeId(0), &p);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            s.load_packet(60, SimTime::ZERO);
            for b in busy {
                let d = s.draw_backoff(&mut rng, &p);
                prop_assert!(d <= p.max_backoff(s.backoff_exponent));
                prop_assert!(s.backoff_exponent >= p.min_be && s.backoff_exponent <= p.max_be);
                let st = if b { ChannelStatus::Busy } else { ChannelStatus::Idle };
                match s.on_backoff_expiry(st, &p) {
                    CsmaAction::Transmit => { s.on_tx_end(Outcome::Delivered, &p); s.load_packet(60, SimTime::ZERO); }
                    CsmaAction::Drop(_) => { s.load_packet(60, SimTime::ZERO); }
                    CsmaAction::Retry => {}
                }
                prop_assert!(s.attempts <= p.max_backoffs);
            }
        }
    }
}
