//! Q-learning slot-selection agent for decentralized TDMA.
//!
//! Each node is an independent learner. Its actions are the slot indices of
//! the transmission frame and it moves between three MAC states depending on
//! what the carrier sense at its chosen slot reported. Once the same slot has
//! been chosen often enough within a short window the agent locks onto it and
//! stops learning.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{sense_jitter, ChannelError, ChannelState, ChannelStatus, NodeId, TransmissionRecord};
use crate::timebase::{slot_start_offset, ScenarioConfig, SimTime, TimebaseError};

/// The three MAC states an agent can be in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MacState {
    /// About to access the channel with a new packet.
    Fresh,
    /// Found the channel busy and will retry the same packet next frame.
    Deferred,
    /// Found the channel free and transmitted.
    Transmitted,
}

impl MacState {
    pub const ALL: [MacState; 3] = [MacState::Fresh, MacState::Deferred, MacState::Transmitted];

    pub fn index(self) -> usize {
        match self {
            MacState::Fresh => 0,
            MacState::Deferred => 1,
            MacState::Transmitted => 2,
        }
    }
}

/// Outcome of one channel access, with its fixed reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reward {
    /// Channel idle, packet sent.
    Sent,
    /// Channel busy, packet kept for the next frame.
    Deferred,
    /// Channel busy with the retry budget spent, packet abandoned.
    Dropped,
}

impl Reward {
    pub fn value(self) -> i32 {
        match self {
            Reward::Sent => 10,
            Reward::Deferred => -10,
            Reward::Dropped => -20,
        }
    }

    pub fn next_state(self) -> MacState {
        match self {
            Reward::Sent => MacState::Transmitted,
            Reward::Deferred => MacState::Deferred,
            Reward::Dropped => MacState::Fresh,
        }
    }
}

/// Action values, one row per [`MacState`], one column per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_slots: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(num_slots: usize) -> Self {
        QTable {
            num_slots,
            values: vec![0.0; MacState::ALL.len() * num_slots],
        }
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn get(&self, s: MacState, slot: usize) -> f64 {
        self.values[s.index() * self.num_slots + slot]
    }

    pub fn set(&mut self, s: MacState, slot: usize, v: f64) {
        self.values[s.index() * self.num_slots + slot] = v;
    }

    pub fn row(&self, s: MacState) -> &[f64] {
        let start = s.index() * self.num_slots;
        &self.values[start..start + self.num_slots]
    }

    pub fn max(&self, s: MacState) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One temporal-difference step on the `(s, slot)` entry.
pub fn update_q(
    q: &mut QTable,
    s: MacState,
    slot: usize,
    reward: f64,
    s_next: MacState,
    alpha: f64,
    gamma: f64,
) {
    let old = q.get(s, slot);
    let target = reward + gamma * q.max(s_next);
    q.set(s, slot, old + alpha * (target - old));
}

/// Indices holding the row maximum.
pub fn argmax_set(row: &[f64]) -> Vec<usize> {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .map(|(i, _)| i)
        .collect()
}

/// Explores a uniform slot when `epsilon > u` for `u ~ U[0, 1)`, otherwise
/// exploits the row maximum with uniformly random tie-breaking.
pub fn epsilon_greedy<R: Rng + ?Sized>(row: &[f64], epsilon: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    if epsilon > u {
        rng.gen_range(0..row.len())
    } else {
        let best = argmax_set(row);
        best[rng.gen_range(0..best.len())]
    }
}

/// The current action counts as converged when it already occupies at least
/// `m - 2` of the previous `m` recorded actions.
pub fn detect_convergence(previous: &VecDeque<usize>, current: usize, m: usize) -> bool {
    if previous.len() < m {
        return false;
    }
    let repeats = previous.iter().rev().take(m).filter(|&&a| a == current).count();
    repeats >= m.saturating_sub(2)
}

/// Broadcast by a node when it joins; receivers re-align their frame timers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncFrame {
    pub origin: NodeId,
    pub timestamp: SimTime,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MacError {
    #[error("node {0} already joined")]
    AlreadyJoined(NodeId),
    #[error("node {0} has not been synchronized")]
    NotSynced(NodeId),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Timebase(#[from] TimebaseError),
}

/// What an agent intends to do in the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FramePlan {
    pub slot: usize,
    /// False once the agent has converged: no Q-update follows.
    pub learning: bool,
}

/// Result of resolving a plan against the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepResult {
    pub slot: usize,
    pub reward: Reward,
    pub state: MacState,
    pub learned: bool,
}

impl StepResult {
    pub fn transmits(&self) -> bool {
        self.reward == Reward::Sent
    }
}

/// [`StepResult`] plus the transmission it produced, for [`AgentState::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub result: StepResult,
    pub record: Option<TransmissionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub node: NodeId,
    pub q: QTable,
    pub mac_state: MacState,
    pub epsilon: f64,
    pub retries: u32,
    /// Most recent chosen slots, oldest first, at most `m_window` long.
    pub action_history: VecDeque<usize>,
    pub converged: bool,
    pub final_slot: Option<usize>,
    pub convergence_iteration: Option<u64>,
    pub rewards: Vec<(u64, i32)>,
    pub frame_origin: Option<SimTime>,
    joined: bool,
}

impl AgentState {
    pub fn new(node: NodeId, cfg: &ScenarioConfig) -> Self {
        AgentState {
            node,
            q: QTable::new(cfg.num_slots),
            mac_state: MacState::Fresh,
            epsilon: cfg.eps_max,
            retries: 0,
            action_history: VecDeque::with_capacity(cfg.m_window),
            converged: false,
            final_slot: None,
            convergence_iteration: None,
            rewards: Vec::new(),
            frame_origin: None,
            joined: false,
        }
    }

    pub fn has_joined(&self) -> bool {
        self.joined
    }

    /// Joins the network at `t`, starting a local frame timer there.
    pub fn join(&mut self, t: SimTime) -> Result<SyncFrame, MacError> {
        if self.joined {
            return Err(MacError::AlreadyJoined(self.node));
        }
        self.joined = true;
        self.frame_origin = Some(t);
        Ok(SyncFrame {
            origin: self.node,
            timestamp: t,
        })
    }

    /// Adopts the sender's frame origin.
    pub fn handle_sync(&mut self, f: &SyncFrame) {
        self.frame_origin = Some(f.timestamp);
    }

    /// Start of iteration `iteration`: the first full frame after the sync
    /// instant is iteration 0.
    pub fn frame_start(&self, iteration: u64, cfg: &ScenarioConfig) -> Result<SimTime, MacError> {
        let origin = self.frame_origin.ok_or(MacError::NotSynced(self.node))?;
        Ok(origin + cfg.frame_period * (iteration + 1))
    }

    pub fn select_action<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        epsilon_greedy(self.q.row(self.mac_state), self.epsilon, rng)
    }

    pub fn decay_epsilon(&mut self, cfg: &ScenarioConfig) {
        if self.epsilon > cfg.eps_min {
            self.epsilon = (self.epsilon * (1.0 - cfg.decay_rate)).max(cfg.eps_min);
        }
    }

    /// Chooses this frame's slot. A learning agent picks by epsilon-greedy and
    /// then checks the pick against its recent history; a hit fixes the slot
    /// for good, starting with this frame.
    pub fn plan_frame<R: Rng + ?Sized>(
        &mut self,
        iteration: u64,
        rng: &mut R,
        cfg: &ScenarioConfig,
    ) -> FramePlan {
        if let Some(slot) = self.final_slot {
            return FramePlan {
                slot,
                learning: false,
            };
        }
        let slot = self.select_action(rng);
        if detect_convergence(&self.action_history, slot, cfg.m_window) {
            self.converged = true;
            self.final_slot = Some(slot);
            self.convergence_iteration = Some(iteration);
            return FramePlan {
                slot,
                learning: false,
            };
        }
        FramePlan {
            slot,
            learning: true,
        }
    }

    /// Applies the carrier-sense result for `plan`: reward, retry bookkeeping,
    /// and (while learning) the Q-update and history.
    pub fn resolve(
        &mut self,
        plan: FramePlan,
        status: ChannelStatus,
        iteration: u64,
        cfg: &ScenarioConfig,
    ) -> StepResult {
        let reward = match status {
            ChannelStatus::Idle => {
                self.retries = 0;
                Reward::Sent
            }
            ChannelStatus::Busy if self.retries < cfg.max_retransmissions => {
                self.retries += 1;
                Reward::Deferred
            }
            ChannelStatus::Busy => {
                self.retries = 0;
                Reward::Dropped
            }
        };
        let next = reward.next_state();
        if plan.learning {
            update_q(
                &mut self.q,
                self.mac_state,
                plan.slot,
                f64::from(reward.value()),
                next,
                cfg.alpha,
                cfg.gamma,
            );
            if self.action_history.len() == cfg.m_window {
                self.action_history.pop_front();
            }
            self.action_history.push_back(plan.slot);
        }
        self.mac_state = next;
        self.decay_epsilon(cfg);
        self.rewards.push((iteration, reward.value()));
        StepResult {
            slot: plan.slot,
            reward,
            state: next,
            learned: plan.learning,
        }
    }

    /// Runs one whole iteration synchronously against `channel`: plan, wait
    /// for the slot plus jitter, sense, and transmit `bytes` on an idle
    /// channel. The packet is left in flight on the channel.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        channel: &mut ChannelState,
        iteration: u64,
        bytes: u32,
        rng: &mut R,
        cfg: &ScenarioConfig,
    ) -> Result<StepOutcome, MacError> {
        let frame_start = self.frame_start(iteration, cfg)?;
        let plan = self.plan_frame(iteration, rng, cfg);
        let at = frame_start + slot_start_offset(plan.slot, cfg)? + sense_jitter(rng, cfg);
        let status = channel.sense(at, self.node)?;
        let result = self.resolve(plan, status, iteration, cfg);
        let record = if result.transmits() {
            Some(channel.begin_transmission(self.node, at, bytes)?)
        } else {
            None
        };
        Ok(StepOutcome { result, record })
    }
}
