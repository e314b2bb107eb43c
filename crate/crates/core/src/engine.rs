//! Deterministic discrete-event loop.
//!
//! The engine owns the channel and every node. Events are totally ordered by
//! `(time, kind, node)`, and each node draws from its own ChaCha stream keyed
//! by the master seed and its id, so the processing order of nodes inside a
//! frame is fixed by timestamps alone.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    sense_jitter, write_log_csv, ChannelError, ChannelState, NodeId, Outcome, TransmissionRecord,
};
use crate::csma::{CsmaAction, CsmaParams, CsmaState, HeadPacket};
use crate::qlearning::{AgentState, FramePlan, MacError, MacState, Reward, SyncFrame};
use crate::timebase::{
    slot_start_offset, validate_config, ConfigViolation, CsmaPacing, ScenarioConfig, SimDuration,
    SimTime,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacKind {
    QLearning,
    Csma,
}

impl MacKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MacKind::QLearning => "qlearning",
            MacKind::Csma => "csma",
        }
    }
}

impl fmt::Display for MacKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MacKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "qlearning" | "tdma" => Ok(MacKind::QLearning),
            "csma" => Ok(MacKind::Csma),
            other => Err(format!("unknown MAC '{other}' (expected qlearning or csma)")),
        }
    }
}

/// Event kinds in tie-break order: at equal timestamps a packet leaves the
/// air before anybody senses, and all CSMA clear-channel assessments at an
/// instant happen before any of the resulting transmissions start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    TxEnd,
    NodeJoin,
    FrameBoundary,
    SlotWake,
    BackoffExpiry,
    TxStart,
    SenseAndTransmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub at: SimTime,
    pub kind: EventKind,
    pub node: NodeId,
    /// Timer generation; frame timers scheduled before a re-sync are stale.
    epoch: u32,
}

impl Event {
    pub fn new(at: SimTime, kind: EventKind, node: NodeId) -> Self {
        Event {
            at,
            kind,
            node,
            epoch: 0,
        }
    }

    fn key(&self) -> (SimTime, EventKind, NodeId) {
        (self.at, self.kind, self.node)
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key()
            .cmp(&other.key())
            .then(self.epoch.cmp(&other.epoch))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue of events.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
}

impl EventQueue {
    pub fn push(&mut self, e: Event) {
        self.heap.push(Reverse(e));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PacketFate {
    Delivered,
    Collided,
    Dropped,
}

/// Life of one packet from head-of-line to delivery or loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub node: NodeId,
    pub generated_at: SimTime,
    /// Transmission end for sent packets, the abandoning sense for drops.
    pub finished_at: SimTime,
    pub bytes: u32,
    pub fate: PacketFate,
    /// Slot the packet was sent in, for TDMA agents.
    pub slot: Option<usize>,
    /// Sent by an agent that had already fixed its slot.
    pub after_convergence: bool,
}

impl PacketRecord {
    pub fn delay(&self) -> Option<SimDuration> {
        (self.fate == PacketFate::Delivered).then(|| self.finished_at - self.generated_at)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSnapshotRow {
    pub iteration: u64,
    pub node: NodeId,
    pub state: MacState,
    pub slot: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record every agent's Q-table at each iteration divisible by this.
    pub q_snapshot_every: Option<u64>,
}

/// Everything a run produced; metrics need nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub mac: MacKind,
    pub seed: u64,
    pub horizon: u64,
    pub config: ScenarioConfig,
    /// Start of iteration 0.
    pub first_frame: SimTime,
    pub sync_frames: Vec<SyncFrame>,
    pub channel_log: Vec<TransmissionRecord>,
    /// `rewards[node][iteration]`; empty for CSMA/CA runs.
    pub rewards: Vec<Vec<i32>>,
    pub convergence: Vec<Option<u64>>,
    pub final_slots: Vec<Option<usize>>,
    pub packets: Vec<PacketRecord>,
    pub q_snapshots: Vec<QSnapshotRow>,
    pub events_processed: u64,
}

impl RunResult {
    pub fn num_nodes(&self) -> usize {
        self.config.num_nodes
    }

    pub fn iteration_start(&self, iteration: u64) -> SimTime {
        self.first_frame + self.config.frame_period * iteration
    }

    pub fn end_time(&self) -> SimTime {
        self.iteration_start(self.horizon)
    }

    /// Iteration containing `t`, if `t` lies inside the run.
    pub fn iteration_of(&self, t: SimTime) -> Option<u64> {
        if t < self.first_frame || t >= self.end_time() {
            return None;
        }
        Some((t - self.first_frame).0 / self.config.frame_period.0)
    }

    /// Iteration at which the slowest node converged.
    pub fn network_convergence(&self) -> Option<u64> {
        if self.mac != MacKind::QLearning || self.convergence.is_empty() {
            return None;
        }
        self.convergence
            .iter()
            .copied()
            .collect::<Option<Vec<_>>>()
            .and_then(|v| v.into_iter().max())
    }

    pub fn to_json(&self) -> serde_json::Result<Vec<u8>> {
        serde_json::to_vec(self)
    }

    /// Writes the run to `dir` and returns the paths written.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>, EngineError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut file = |name: &str| -> Result<(PathBuf, BufWriter<fs::File>), EngineError> {
            let p = dir.join(name);
            let f = fs::File::create(&p)?;
            written.push(p.clone());
            Ok((p, BufWriter::new(f)))
        };

        let (_, w) = file("events.csv")?;
        write_log_csv(&self.channel_log, w)?;

        let (_, w) = file("rewards.csv")?;
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["iteration", "node", "reward"])?;
        for (node, series) in self.rewards.iter().enumerate() {
            for (it, r) in series.iter().enumerate() {
                w.write_record([it.to_string(), node.to_string(), r.to_string()])?;
            }
        }
        w.flush()?;

        let (_, w) = file("delays.csv")?;
        let mut w = csv::Writer::from_writer(w);
        w.write_record([
            "node",
            "generated_us",
            "finished_us",
            "delay_us",
            "bytes",
            "fate",
            "slot",
            "after_convergence",
        ])?;
        for p in &self.packets {
            w.write_record([
                p.node.to_string(),
                p.generated_at.0.to_string(),
                p.finished_at.0.to_string(),
                p.delay().map(|d| d.0.to_string()).unwrap_or_default(),
                p.bytes.to_string(),
                format!("{:?}", p.fate),
                p.slot.map(|s| s.to_string()).unwrap_or_default(),
                p.after_convergence.to_string(),
            ])?;
        }
        w.flush()?;

        let (_, w) = file("convergence.csv")?;
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["node", "convergence_iteration", "final_slot"])?;
        for (node, (c, s)) in self.convergence.iter().zip(&self.final_slots).enumerate() {
            w.write_record([
                node.to_string(),
                c.map(|v| v.to_string()).unwrap_or_default(),
                s.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;

        let p = dir.join("config.toml");
        fs::write(&p, toml::to_string(&self.config)?)?;
        written.push(p);

        let p = dir.join("seed.txt");
        fs::write(&p, format!("{}\n", self.seed))?;
        written.push(p);

        let p = dir.join("run.toml");
        fs::write(
            &p,
            format!(
                "mac = \"{}\"\nhorizon = {}\nfirst_frame_us = {}\nevents_processed = {}\n",
                self.mac, self.horizon, self.first_frame.0, self.events_processed
            ),
        )?;
        written.push(p);

        if !self.q_snapshots.is_empty() {
            let p = dir.join("qtable.csv");
            let mut w = csv::Writer::from_path(&p)?;
            w.write_record(["iteration", "node", "state", "slot", "value"])?;
            for r in &self.q_snapshots {
                w.write_record([
                    r.iteration.to_string(),
                    r.node.to_string(),
                    format!("{:?}", r.state),
                    r.slot.to_string(),
                    format!("{:?}", r.value),
                ])?;
            }
            w.flush()?;
            written.push(p);
        }
        Ok(written)
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidConfig(Vec<ConfigViolation>),
    #[error("horizon must be at least one frame")]
    ZeroHorizon,
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Timebase(#[from] crate::timebase::TimebaseError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("config echo: {0}")]
    Toml(#[from] toml::ser::Error),
}

/// Independent per-node stream: same master seed, distinct stream ids.
pub fn node_rng(seed: u64, node: NodeId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(node.0));
    rng
}

pub fn run(cfg: &ScenarioConfig, mac: MacKind, horizon: u64) -> Result<RunResult, EngineError> {
    run_with(cfg, mac, horizon, &RunOptions::default())
}

pub fn run_with(
    cfg: &ScenarioConfig,
    mac: MacKind,
    horizon: u64,
    opts: &RunOptions,
) -> Result<RunResult, EngineError> {
    validate_config(cfg).map_err(EngineError::InvalidConfig)?;
    if horizon == 0 {
        return Err(EngineError::ZeroHorizon);
    }
    let mut sim = Sim::new(cfg, mac, horizon, opts);
    sim.run()?;
    Ok(sim.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CsmaPhase {
    /// No packet; the next frame boundary loads one.
    Idle,
    /// Holding a packet that retries at the next frame boundary.
    AwaitFrame,
    Backoff,
    Transmitting,
}

struct Node {
    id: NodeId,
    rng: ChaCha8Rng,
    epoch: u32,
    frame_origin: Option<SimTime>,
    agent: AgentState,
    plan: Option<(u64, FramePlan)>,
    head: Option<SimTime>,
    in_flight: Option<(u32, usize, bool)>,
    csma: CsmaState,
    phase: CsmaPhase,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    mac: MacKind,
    horizon: u64,
    opts: &'a RunOptions,
    csma: CsmaParams,
    queue: EventQueue,
    channel: ChannelState,
    nodes: Vec<Node>,
    sync_frames: Vec<SyncFrame>,
    rewards: Vec<Vec<i32>>,
    packets: Vec<PacketRecord>,
    q_snapshots: Vec<QSnapshotRow>,
    last_time: SimTime,
    events: u64,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, mac: MacKind, horizon: u64, opts: &'a RunOptions) -> Self {
        let csma = CsmaParams::from(cfg);
        let nodes = (0..cfg.num_nodes)
            .map(|i| {
                let id = NodeId(i as u32);
                Node {
                    id,
                    rng: node_rng(cfg.rng_seed, id),
                    epoch: 0,
                    frame_origin: None,
                    agent: AgentState::new(id, cfg),
                    plan: None,
                    head: None,
                    in_flight: None,
                    csma: CsmaState::new(id, &csma),
                    phase: CsmaPhase::Idle,
                }
            })
            .collect();
        let rewards = match mac {
            MacKind::QLearning => vec![Vec::with_capacity(horizon as usize); cfg.num_nodes],
            MacKind::Csma => Vec::new(),
        };
        let mut queue = EventQueue::default();
        for i in 0..cfg.num_nodes {
            let at = SimTime::ZERO + cfg.join_spacing * i as u64;
            queue.push(Event::new(at, EventKind::NodeJoin, NodeId(i as u32)));
        }
        Sim {
            cfg,
            mac,
            horizon,
            opts,
            csma,
            queue,
            channel: ChannelState::new(cfg.data_rate),
            nodes,
            sync_frames: Vec::new(),
            rewards,
            packets: Vec::new(),
            q_snapshots: Vec::new(),
            last_time: SimTime::ZERO,
            events: 0,
        }
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind, node: usize) {
        let epoch = self.nodes[node].epoch;
        self.queue.push(Event {
            at,
            kind,
            node: NodeId(node as u32),
            epoch,
        });
    }

    fn iteration_at(&self, node: usize, t: SimTime) -> u64 {
        let origin = self.nodes[node].frame_origin.expect("frame timer set");
        (t - origin).0 / self.cfg.frame_period.0 - 1
    }

    fn end_time(&self) -> Option<SimTime> {
        self.nodes
            .first()
            .and_then(|n| n.frame_origin)
            .map(|o| o + self.cfg.frame_period * (self.horizon + 1))
    }

    fn run(&mut self) -> Result<(), EngineError> {
        while let Some(ev) = self.queue.pop() {
            debug_assert!(ev.at >= self.last_time, "time went backwards");
            self.last_time = ev.at;
            let n = ev.node.0 as usize;
            if ev.kind == EventKind::FrameBoundary && ev.epoch != self.nodes[n].epoch {
                continue;
            }
            self.events += 1;
            match ev.kind {
                EventKind::NodeJoin => self.on_join(n, ev.at)?,
                EventKind::FrameBoundary => match self.mac {
                    MacKind::QLearning => self.tdma_frame(n, ev.at)?,
                    MacKind::Csma => self.csma_frame(n, ev.at),
                },
                EventKind::SlotWake => {
                    let node = &mut self.nodes[n];
                    let at = ev.at + sense_jitter(&mut node.rng, self.cfg);
                    self.schedule(at, EventKind::SenseAndTransmit, n);
                }
                EventKind::SenseAndTransmit => self.tdma_sense(n, ev.at)?,
                EventKind::BackoffExpiry => self.csma_expiry(n, ev.at)?,
                EventKind::TxStart => self.csma_start(n, ev.at)?,
                EventKind::TxEnd => self.on_tx_end(n, ev.at)?,
            }
        }
        Ok(())
    }

    fn on_join(&mut self, n: usize, t: SimTime) -> Result<(), EngineError> {
        let sync = self.nodes[n].agent.join(t)?;
        self.sync_frames.push(sync);
        let fp = self.cfg.frame_period;
        for i in 0..self.nodes.len() {
            if !self.nodes[i].agent.has_joined() {
                continue;
            }
            if i != n {
                self.nodes[i].agent.handle_sync(&sync);
            }
            // every synced node restarts its frame timer on the new origin
            self.nodes[i].frame_origin = Some(sync.timestamp);
            self.nodes[i].epoch += 1;
            self.schedule(sync.timestamp + fp, EventKind::FrameBoundary, i);
        }
        Ok(())
    }

    fn tdma_frame(&mut self, n: usize, t: SimTime) -> Result<(), EngineError> {
        let it = self.iteration_at(n, t);
        if it >= self.horizon {
            return Ok(());
        }
        let cfg = self.cfg;
        self.schedule(t + cfg.frame_period, EventKind::FrameBoundary, n);
        let node = &mut self.nodes[n];
        if node.head.is_none() {
            node.head = Some(t);
        }
        if let Some(every) = self.opts.q_snapshot_every {
            if every > 0 && it.is_multiple_of(every) {
                for s in MacState::ALL {
                    for (slot, &value) in node.agent.q.row(s).iter().enumerate() {
                        self.q_snapshots.push(QSnapshotRow {
                            iteration: it,
                            node: node.id,
                            state: s,
                            slot,
                            value,
                        });
                    }
                }
            }
        }
        let plan = node.agent.plan_frame(it, &mut node.rng, cfg);
        node.plan = Some((it, plan));
        let wake = t + slot_start_offset(plan.slot, cfg)?;
        self.schedule(wake, EventKind::SlotWake, n);
        Ok(())
    }

    fn tdma_sense(&mut self, n: usize, t: SimTime) -> Result<(), EngineError> {
        let cfg = self.cfg;
        let node = &mut self.nodes[n];
        let (it, plan) = node.plan.take().expect("sense without a plan");
        let status = self.channel.sense(t, node.id).map_err(MacError::from)?;
        let res = node.agent.resolve(plan, status, it, cfg);
        self.rewards[n].push(res.reward.value());
        debug_assert_eq!(self.rewards[n].len() as u64, it + 1);
        match res.reward {
            Reward::Sent => {
                let bytes = if plan.learning {
                    cfg.training_packet_bytes
                } else {
                    cfg.data_packet_bytes
                };
                let rec = self.channel.begin_transmission(node.id, t, bytes)?;
                node.in_flight = Some((bytes, plan.slot, !plan.learning));
                let end = rec.end();
                self.schedule(end, EventKind::TxEnd, n);
            }
            Reward::Deferred => {}
            Reward::Dropped => {
                let generated_at = node.head.take().expect("head packet");
                self.packets.push(PacketRecord {
                    node: node.id,
                    generated_at,
                    finished_at: t,
                    bytes: if plan.learning {
                        cfg.training_packet_bytes
                    } else {
                        cfg.data_packet_bytes
                    },
                    fate: PacketFate::Dropped,
                    slot: Some(plan.slot),
                    after_convergence: !plan.learning,
                });
            }
        }
        Ok(())
    }

    fn on_tx_end(&mut self, n: usize, t: SimTime) -> Result<(), EngineError> {
        let rec = self.channel.end_transmission(NodeId(n as u32))?;
        let fate = match rec.outcome {
            Outcome::Delivered => PacketFate::Delivered,
            Outcome::Collided => PacketFate::Collided,
        };
        match self.mac {
            MacKind::QLearning => {
                let node = &mut self.nodes[n];
                let (bytes, slot, after) = node.in_flight.take().expect("in-flight packet");
                let generated_at = node.head.take().expect("head packet");
                self.packets.push(PacketRecord {
                    node: node.id,
                    generated_at,
                    finished_at: t,
                    bytes,
                    fate,
                    slot: Some(slot),
                    after_convergence: after,
                });
            }
            MacKind::Csma => {
                let params = self.csma;
                let node = &mut self.nodes[n];
                let head = node
                    .csma
                    .on_tx_end(rec.outcome, &params)
                    .expect("head packet");
                self.packets.push(PacketRecord {
                    node: node.id,
                    generated_at: head.generated_at,
                    finished_at: t,
                    bytes: head.bytes,
                    fate,
                    slot: None,
                    after_convergence: false,
                });
                node.phase = CsmaPhase::Idle;
                if params.pacing == CsmaPacing::Saturated {
                    self.csma_contend(n, t, true);
                }
            }
        }
        Ok(())
    }

    fn csma_frame(&mut self, n: usize, t: SimTime) {
        let it = self.iteration_at(n, t);
        if it >= self.horizon {
            return;
        }
        match self.csma.pacing {
            CsmaPacing::Frame => {
                self.schedule(t + self.cfg.frame_period, EventKind::FrameBoundary, n);
                match self.nodes[n].phase {
                    CsmaPhase::Idle => self.csma_contend(n, t, true),
                    CsmaPhase::AwaitFrame => self.csma_contend(n, t, false),
                    // contention spilled over from the previous frame
                    CsmaPhase::Backoff | CsmaPhase::Transmitting => {}
                }
            }
            CsmaPacing::Saturated => {
                // only the first boundary matters; from then on contention is unpaced
                if it == 0 {
                    self.csma_contend(n, t, true);
                }
            }
        }
    }

    /// Starts a backoff at `t`, loading a fresh packet first if asked.
    fn csma_contend(&mut self, n: usize, t: SimTime, fresh: bool) {
        if self.end_time().is_some_and(|end| t >= end) {
            return;
        }
        let params = self.csma;
        let bytes = self.cfg.data_packet_bytes;
        let node = &mut self.nodes[n];
        if fresh {
            node.csma.load_packet(bytes, t);
        }
        let backoff = node.csma.draw_backoff(&mut node.rng, &params);
        node.phase = CsmaPhase::Backoff;
        self.schedule(t + backoff, EventKind::BackoffExpiry, n);
    }

    fn csma_expiry(&mut self, n: usize, t: SimTime) -> Result<(), EngineError> {
        let params = self.csma;
        let node = &mut self.nodes[n];
        let status = self.channel.sense(t, node.id)?;
        match node.csma.on_backoff_expiry(status, &params) {
            CsmaAction::Transmit => {
                node.phase = CsmaPhase::Transmitting;
                self.schedule(t, EventKind::TxStart, n);
            }
            CsmaAction::Retry => match params.pacing {
                CsmaPacing::Frame => node.phase = CsmaPhase::AwaitFrame,
                CsmaPacing::Saturated => self.csma_contend(n, t, false),
            },
            CsmaAction::Drop(head) => {
                self.packets.push(PacketRecord {
                    node: node.id,
                    generated_at: head.generated_at,
                    finished_at: t,
                    bytes: head.bytes,
                    fate: PacketFate::Dropped,
                    slot: None,
                    after_convergence: false,
                });
                node.phase = CsmaPhase::Idle;
                if params.pacing == CsmaPacing::Saturated {
                    self.csma_contend(n, t, true);
                }
            }
        }
        Ok(())
    }

    fn csma_start(&mut self, n: usize, t: SimTime) -> Result<(), EngineError> {
        let node = &self.nodes[n];
        let HeadPacket { bytes, .. } = node.csma.head_packet.expect("head packet");
        let rec = self.channel.begin_transmission(node.id, t, bytes)?;
        self.schedule(rec.end(), EventKind::TxEnd, n);
        Ok(())
    }

    fn finish(self) -> RunResult {
        let first_frame = self
            .nodes
            .first()
            .and_then(|n| n.frame_origin)
            .map_or(SimTime::ZERO, |o| o + self.cfg.frame_period);
        let (convergence, final_slots) = match self.mac {
            MacKind::QLearning => self
                .nodes
                .iter()
                .map(|n| (n.agent.convergence_iteration, n.agent.final_slot))
                .unzip(),
            MacKind::Csma => (Vec::new(), Vec::new()),
        };
        RunResult {
            mac: self.mac,
            seed: self.cfg.rng_seed,
            horizon: self.horizon,
            config: self.cfg.clone(),
            first_frame,
            sync_frames: self.sync_frames,
            channel_log: self.channel.into_log(),
            rewards: self.rewards,
            convergence,
            final_slots,
            packets: self.packets,
            q_snapshots: self.q_snapshots,
            events_processed: self.events,
        }
    }
}
