use std::collections::BTreeMap;

use proptest::prelude::*;
use qtdma::channel::Outcome;
use qtdma::engine::{run, MacKind, PacketFate, RunResult};
use qtdma::timebase::{CsmaPacing, ScenarioConfig, SimDuration};

fn cfg(seed: u64) -> ScenarioConfig {
    ScenarioConfig::default().with_seed(seed)
}

fn single(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        num_nodes: 1,
        ..cfg(seed)
    }
}

fn collision_rate(r: &RunResult) -> f64 {
    let bad = r.channel_log.iter().filter(|x| x.outcome == Outcome::Collided).count();
    bad as f64 / r.channel_log.len().max(1) as f64
}

#[test]
fn single_agent_converges_once_history_fills() {
    let iters: Vec<u64> = (0..50)
        .map(|s| run(&single(s), MacKind::QLearning, 500).unwrap().network_convergence().unwrap())
        .collect();
    let early = iters.iter().filter(|&&i| i <= 100).count();
    assert!(early >= 45, "{early}/50 converged by iteration 100: {iters:?}");
    assert!(iters.iter().all(|&i| i >= 6));
}

#[test]
fn single_agent_never_senses_busy() {
    let r = run(&single(3), MacKind::QLearning, 500).unwrap();
    assert!(r.rewards[0].iter().all(|&x| x == 10));
    assert!(r.channel_log.iter().all(|x| x.outcome == Outcome::Delivered));
}

#[test]
fn converged_agent_transmits_once_per_frame_in_its_slot() {
    let r = run(&single(5), MacKind::QLearning, 400).unwrap();
    let c = r.network_convergence().unwrap();
    let slot = r.final_slots[0].unwrap() as u64;
    let after: Vec<_> = r
        .channel_log
        .iter()
        .filter(|x| r.iteration_of(x.start).unwrap() > c)
        .collect();
    assert_eq!(after.len() as u64, 400 - c - 1);
    for x in after {
        let it = r.iteration_of(x.start).unwrap();
        let off = x.start - r.iteration_start(it);
        let base = SimDuration::from_micros(4_600 * slot);
        assert!(off >= base && off <= base + SimDuration::from_micros(50), "{off}");
    }
}

#[test]
fn learning_agents_act_once_per_frame() {
    let r = run(&cfg(11), MacKind::QLearning, 600).unwrap();
    let mut per: BTreeMap<_, u32> = BTreeMap::new();
    for x in &r.channel_log {
        *per.entry((x.sender, r.iteration_of(x.start).unwrap())).or_default() += 1;
    }
    assert!(per.values().all(|&n| n == 1));
    for node in &r.rewards {
        assert_eq!(node.len(), 600);
        assert!(node.iter().all(|x| [10, -10, -20].contains(x)));
    }
}

#[test]
fn frame_boundaries_coincide_after_last_sync() {
    let r = run(&cfg(0), MacKind::QLearning, 10).unwrap();
    let last = r.sync_frames.last().unwrap().timestamp;
    assert!(r.sync_frames.iter().all(|s| s.timestamp <= last));
    assert_eq!(r.first_frame, last + r.config.frame_period);
}

#[test]
fn adding_nodes_leaves_node0_draws_unchanged() {
    // node 0's iteration-0 sense instant depends only on its own stream
    let mut compared = 0;
    for seed in 0..40 {
        let many = run(&cfg(seed), MacKind::QLearning, 1).unwrap();
        let one = run(&single(seed), MacKind::QLearning, 1).unwrap();
        let Some(a) = many.channel_log.iter().find(|x| x.sender.0 == 0) else {
            continue;
        };
        let b = one.channel_log[0];
        assert_eq!(a.start - many.first_frame, b.start - one.first_frame, "seed {seed}");
        compared += 1;
    }
    assert!(compared >= 20);
}

#[test]
fn csma_single_node_frame_paced_closed_form() {
    // one packet per frame, no contention: delay = backoff + airtime,
    // backoff uniform over 0..=7 ms
    let r = run(&single(1), MacKind::Csma, 10_000).unwrap();
    let delivered: Vec<_> = r.packets.iter().filter(|p| p.fate == PacketFate::Delivered).collect();
    assert_eq!(delivered.len(), r.packets.len());
    assert!(delivered.len() >= 9_999);
    let mean_delay = delivered.iter().map(|p| p.delay().unwrap().as_millis_f64()).sum::<f64>()
        / delivered.len() as f64;
    assert!((mean_delay - 16.0).abs() / 16.0 < 0.05, "{mean_delay}");
    let g = qtdma::metrics::goodput_between(&r, r.first_frame, r.end_time());
    assert!((g - 0.125).abs() / 0.125 < 0.05, "{g}");
}

#[test]
fn csma_single_node_saturated_closed_form() {
    let c = ScenarioConfig {
        csma_pacing: CsmaPacing::Saturated,
        ..single(2)
    };
    let r = run(&c, MacKind::Csma, 1_700).unwrap();
    assert!(r.packets.len() >= 10_000, "{}", r.packets.len());
    assert!(r.packets.iter().all(|p| p.fate == PacketFate::Delivered));
    let g = qtdma::metrics::goodput_between(&r, r.first_frame, r.end_time());
    let expect = 12.5 / (3.5 + 12.5);
    assert!((g - expect).abs() / expect < 0.05, "{g} vs {expect}");
}

#[test]
fn csma_zero_backoff_goodput_bounded_by_one() {
    let c = ScenarioConfig {
        csma_pacing: CsmaPacing::Saturated,
        csma_min_be: 0,
        csma_max_be: 0,
        ..single(0)
    };
    let r = run(&c, MacKind::Csma, 50).unwrap();
    let g = qtdma::metrics::goodput(&r, SimDuration::from_millis(100)).unwrap();
    assert!(g.ys().all(|y| (0.0..=1.0).contains(&y)));
    assert!(g.ys().skip(1).all(|y| y > 0.99));
}

#[test]
fn csma_collision_rate_grows_with_nodes() {
    for pacing in [CsmaPacing::Frame, CsmaPacing::Saturated] {
        let rates: Vec<f64> = [1usize, 2, 4, 8]
            .iter()
            .map(|&n| {
                (0..10)
                    .map(|s| {
                        let c = ScenarioConfig {
                            num_nodes: n,
                            csma_pacing: pacing,
                            ..cfg(s)
                        };
                        collision_rate(&run(&c, MacKind::Csma, 500).unwrap())
                    })
                    .sum::<f64>()
                    / 10.0
            })
            .collect();
        assert_eq!(rates[0], 0.0);
        assert!(rates.windows(2).all(|w| w[0] <= w[1]), "{pacing:?}: {rates:?}");
    }
}

#[test]
fn replay_is_identical() {
    let a = run(&cfg(42), MacKind::QLearning, 500).unwrap();
    let b = run(&cfg(42), MacKind::QLearning, 500).unwrap();
    assert_eq!(a, b);
    let c = run(&cfg(43), MacKind::QLearning, 500).unwrap();
    assert_ne!(a.channel_log, c.channel_log);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn channel_log_is_consistent(seed in any::<u64>(), n in 1usize..7, csma in any::<bool>()) {
        let mac = if csma { MacKind::Csma } else { MacKind::QLearning };
        let c = ScenarioConfig { num_nodes: n, ..cfg(seed) };
        let r = run(&c, mac, 120).unwrap();
        let log = &r.channel_log;
        for (i, a) in log.iter().enumerate() {
            let overlapped = log.iter().enumerate().any(|(j, b)| i != j && a.overlaps(b));
            prop_assert_eq!(a.outcome == Outcome::Collided, overlapped);
        }
        prop_assert!(log.windows(2).all(|w| (w[0].start, w[0].sender) <= (w[1].start, w[1].sender)));
    }

    #[test]
    fn converged_agents_keep_their_slot(seed in any::<u64>()) {
        let r = run(&cfg(seed), MacKind::QLearning, 400).unwrap();
        for (node, (conv, slot)) in r.convergence.iter().zip(&r.final_slots).enumerate() {
            let (Some(_), Some(slot)) = (conv, slot) else { continue };
            for p in r.packets.iter().filter(|p| p.node.0 as usize == node && p.after_convergence) {
                prop_assert_eq!(p.slot, Some(*slot));
            }
        }
    }

    #[test]
    fn same_slot_contenders_never_both_transmit(seed in any::<u64>()) {
        let r = run(&cfg(seed), MacKind::QLearning, 200).unwrap();
        // every TDMA attempt senses first, and equal instants resolve by node id
        let collided = r.channel_log.iter().filter(|x| x.outcome == Outcome::Collided).count();
        prop_assert_eq!(collided, 0);
    }
}
