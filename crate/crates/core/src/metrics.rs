//! Post-processing of a [`RunResult`]: learning curve, goodput, delay,
//! convergence time and the packet-size sweep.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Outcome;
use crate::engine::{run, EngineError, MacKind, PacketFate, RunResult};
use crate::timebase::{ScenarioConfig, SimDuration, SimTime};

pub const DEFAULT_REWARD_WINDOW: usize = 20;
pub const DEFAULT_GOODPUT_WINDOW: SimDuration = SimDuration(1_000_000);
pub const DEFAULT_SWEEP: [u32; 6] = [30, 60, 90, 120, 150, 180];
/// Frames discarded before a CSMA/CA run counts as steady.
pub const CSMA_WARMUP_FRAMES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Reward,
    Goodput,
    Delay,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::Reward => "reward",
            SeriesKind::Goodput => "goodput",
            SeriesKind::Delay => "delay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
}

/// Reward series are indexed by iteration with a window in iterations;
/// goodput and delay by elapsed seconds since iteration 0 with a window in ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub kind: SeriesKind,
    pub window: f64,
    pub samples: Vec<Sample>,
}

impl MetricsSeries {
    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.y)
    }

    pub fn write_csv<W: Write>(&self, seed: u64, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "kind", "window", "seed"])?;
        for s in &self.samples {
            w.write_record([
                format!("{:?}", s.x),
                format!("{:?}", s.y),
                self.kind.as_str().to_string(),
                format!("{:?}", self.window),
                seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("run has no reward series")]
    EmptyRewards,
    #[error("averaging window must be positive")]
    ZeroWindow,
    #[error("metric needs a qlearning run")]
    NotQLearning,
    #[error("not converged within horizon of {horizon} iterations")]
    NotConverged { horizon: u64 },
    #[error("no steady-state frames left after iteration {from} (horizon {horizon})")]
    NoSteadyState { from: u64, horizon: u64 },
    #[error(
        "data packet of {size} B exceeds the {max} B training packet; \
         a learned slot only fits packets up to the training packet size"
    )]
    SizeAboveTraining { size: u32, max: u32 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub fn network_average_reward(r: &RunResult, window: usize) -> Result<MetricsSeries, MetricsError> {
    if window == 0 {
        return Err(MetricsError::ZeroWindow);
    }
    let len = r.rewards.iter().map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return Err(MetricsError::EmptyRewards);
    }
    let nodes = r.rewards.len() as f64;
    let mut sums = vec![0i64; r.rewards.len()];
    let samples = (0..len)
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let n = (i + 1 - lo) as f64;
            let mut total = 0.0;
            for (series, sum) in r.rewards.iter().zip(sums.iter_mut()) {
                *sum += i64::from(series[i]);
                if i >= window {
                    *sum -= i64::from(series[i - window]);
                }
                total += *sum as f64 / n;
            }
            Sample {
                x: i as f64,
                y: total / nodes,
            }
        })
        .collect();
    Ok(MetricsSeries {
        kind: SeriesKind::Reward,
        window: window as f64,
        samples,
    })
}

/// Delivered airtime inside `[from, to)` over the interval length.
pub fn goodput_between(r: &RunResult, from: SimTime, to: SimTime) -> f64 {
    if to <= from {
        return 0.0;
    }
    let busy: u64 = r
        .channel_log
        .iter()
        .filter(|rec| rec.outcome == Outcome::Delivered)
        .map(|rec| {
            let s = rec.start.max(from);
            let e = rec.end().min(to);
            e.0.saturating_sub(s.0)
        })
        .sum();
    busy as f64 / (to - from).0 as f64
}

fn windows(r: &RunResult, window: SimDuration) -> impl Iterator<Item = (SimTime, SimTime)> + '_ {
    let n = (r.end_time() - r.first_frame).0 / window.0.max(1);
    (0..n).map(move |k| {
        let s = r.first_frame + window * k;
        (s, s + window)
    })
}

fn elapsed_secs(r: &RunResult, t: SimTime) -> f64 {
    (t - r.first_frame).as_secs_f64()
}

/// Goodput per consecutive window from the start of iteration 0; a trailing
/// partial window is dropped.
pub fn goodput(r: &RunResult, window: SimDuration) -> Result<MetricsSeries, MetricsError> {
    if window == SimDuration::ZERO {
        return Err(MetricsError::ZeroWindow);
    }
    let samples = windows(r, window)
        .map(|(s, e)| Sample {
            x: elapsed_secs(r, e),
            y: goodput_between(r, s, e),
        })
        .collect();
    Ok(MetricsSeries {
        kind: SeriesKind::Goodput,
        window: window.as_millis_f64(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    /// Mean delay in ms of packets delivered in each window; windows
    /// without deliveries are omitted.
    pub series: MetricsSeries,
    /// Whole-run mean in ms; `None` when nothing was delivered.
    pub overall_ms: Option<f64>,
}

fn mean(vals: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = vals.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

pub fn delays_ms(r: &RunResult) -> impl Iterator<Item = (SimTime, f64)> + '_ {
    r.packets
        .iter()
        .filter_map(|p| p.delay().map(|d| (p.finished_at, d.as_millis_f64())))
}

pub fn average_delay(r: &RunResult, window: SimDuration) -> Result<DelayReport, MetricsError> {
    if window == SimDuration::ZERO {
        return Err(MetricsError::ZeroWindow);
    }
    let samples = windows(r, window)
        .filter_map(|(s, e)| {
            mean(delays_ms(r).filter(|&(t, _)| t >= s && t < e).map(|(_, d)| d)).map(|y| Sample {
                x: elapsed_secs(r, e),
                y,
            })
        })
        .collect();
    Ok(DelayReport {
        series: MetricsSeries {
            kind: SeriesKind::Delay,
            window: window.as_millis_f64(),
            samples,
        },
        overall_ms: mean(delays_ms(r).map(|(_, d)| d)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTime {
    pub per_node: Vec<u64>,
    pub network_iterations: u64,
    pub network_seconds: f64,
}

pub fn convergence_time(r: &RunResult) -> Result<ConvergenceTime, MetricsError> {
    if r.mac != MacKind::QLearning {
        return Err(MetricsError::NotQLearning);
    }
    let per_node = r
        .convergence
        .iter()
        .copied()
        .collect::<Option<Vec<_>>>()
        .filter(|v| !v.is_empty())
        .ok_or(MetricsError::NotConverged { horizon: r.horizon })?;
    let network_iterations = *per_node.iter().max().expect("non-empty");
    Ok(ConvergenceTime {
        network_seconds: (r.config.frame_period * network_iterations).as_secs_f64(),
        per_node,
        network_iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub from_iteration: u64,
    pub goodput: f64,
    /// Mean delay in ms of packets generated in the steady interval.
    pub delay_ms: Option<f64>,
}

/// First iteration counted as steady: the one after the slowest node fixed
/// its slot, or the end of the warm-up for CSMA/CA.
pub fn steady_start(r: &RunResult) -> Result<u64, MetricsError> {
    let from = match r.mac {
        MacKind::QLearning => convergence_time(r)?.network_iterations + 1,
        MacKind::Csma => CSMA_WARMUP_FRAMES.min(r.horizon / 2),
    };
    if from >= r.horizon {
        return Err(MetricsError::NoSteadyState {
            from,
            horizon: r.horizon,
        });
    }
    Ok(from)
}

pub fn steady_state(r: &RunResult) -> Result<SteadyState, MetricsError> {
    let from_iteration = steady_start(r)?;
    let from = r.iteration_start(from_iteration);
    let delay_ms = mean(
        r.packets
            .iter()
            .filter(|p| p.generated_at >= from && p.fate == PacketFate::Delivered)
            .filter_map(|p| p.delay())
            .map(SimDuration::as_millis_f64),
    );
    Ok(SteadyState {
        from_iteration,
        goodput: goodput_between(r, from, r.end_time()),
        delay_ms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: u32,
    pub goodput: f64,
    pub delay_ms: Option<f64>,
}

pub fn check_sweep_sizes(cfg: &ScenarioConfig, sizes: &[u32], mac: MacKind) -> Result<(), MetricsError> {
    if mac == MacKind::QLearning {
        if let Some(&size) = sizes.iter().find(|&&s| s > cfg.training_packet_bytes) {
            return Err(MetricsError::SizeAboveTraining {
                size,
                max: cfg.training_packet_bytes,
            });
        }
    }
    Ok(())
}

/// One steady-state measurement per data packet size, all from `cfg.rng_seed`.
pub fn packet_size_sweep(
    cfg: &ScenarioConfig,
    sizes: &[u32],
    mac: MacKind,
    horizon: u64,
) -> Result<Vec<SweepRow>, MetricsError> {
    check_sweep_sizes(cfg, sizes, mac)?;
    sizes
        .iter()
        .map(|&size| {
            let c = ScenarioConfig {
                data_packet_bytes: size,
                ..cfg.clone()
            };
            let ss = steady_state(&run(&c, mac, horizon)?)?;
            Ok(SweepRow {
                size,
                goodput: ss.goodput,
                delay_ms: ss.delay_ms,
            })
        })
        .collect()
}
