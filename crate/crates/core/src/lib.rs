//! Discrete-event simulator of Q-learning TDMA slot selection against an
//! unslotted CSMA/CA baseline on a shared broadcast optical channel.

pub mod channel;
pub mod cli;
pub mod csma;
pub mod engine;
pub mod metrics;
pub mod qlearning;
pub mod timebase;

pub use channel::{ChannelState, ChannelStatus, NodeId, Outcome, TransmissionRecord};
pub use engine::{run, run_with, MacKind, PacketFate, PacketRecord, RunOptions, RunResult};
pub use qlearning::{AgentState, MacState, QTable, Reward};
pub use timebase::{CsmaPacing, ScenarioConfig, SimDuration, SimTime};
