use proptest::prelude::*;
use qtdma::channel::{NodeId, Outcome, TransmissionRecord};
use qtdma::engine::{run, MacKind, PacketFate, PacketRecord, RunResult};
use qtdma::metrics::{average_delay, goodput, goodput_between, network_average_reward, steady_state};
use qtdma::timebase::{ScenarioConfig, SimDuration, SimTime};

fn shell(horizon: u64) -> RunResult {
    let mut r = run(&ScenarioConfig::default(), MacKind::Csma, 1).unwrap();
    r.horizon = horizon;
    r.first_frame = SimTime::ZERO;
    r.channel_log.clear();
    r.packets.clear();
    r
}

#[test]
fn single_node_delay_is_slot_offset_plus_airtime() {
    for seed in 0..10 {
        let cfg = ScenarioConfig {
            num_nodes: 1,
            ..ScenarioConfig::default().with_seed(seed)
        };
        let r = run(&cfg, MacKind::QLearning, 300).unwrap();
        let k = r.final_slots[0].unwrap() as u64;
        let base = 4_600 * k + 12_500;
        let post: Vec<_> = r.packets.iter().filter(|p| p.after_convergence).collect();
        assert!(!post.is_empty());
        for p in post {
            let d = p.delay().unwrap().0;
            assert!((base..=base + 50).contains(&d), "slot {k}: {d}");
        }
        if k == 0 {
            let d = average_delay(&r, SimDuration::from_millis(1000)).unwrap();
            assert!(d.series.ys().skip(20).all(|y| (12.5..=12.55).contains(&y)));
        }
    }
}

#[test]
fn single_node_steady_goodput_is_one_airtime_per_frame() {
    let cfg = ScenarioConfig {
        num_nodes: 1,
        ..ScenarioConfig::default()
    };
    let r = run(&cfg, MacKind::QLearning, 500).unwrap();
    assert_eq!(steady_state(&r).unwrap().goodput, 0.125);
    assert!(network_average_reward(&r, 20).unwrap().ys().all(|y| y == 10.0));
}

fn arb_log() -> impl Strategy<Value = Vec<(u64, u64, bool)>> {
    proptest::collection::vec((0u64..980_001, 1u64..20_000, any::<bool>()), 0..60)
}

proptest! {
    #[test]
    fn goodput_equals_delivered_airtime_over_elapsed(log in arb_log()) {
        let mut r = shell(10);
        r.channel_log = log
            .iter()
            .map(|&(s, d, ok)| TransmissionRecord {
                sender: NodeId(0),
                start: SimTime(s),
                duration: SimDuration(d),
                payload_bytes: 1,
                outcome: if ok { Outcome::Delivered } else { Outcome::Collided },
            })
            .collect();
        // all records lie inside [0, 1 s), so nothing is clipped
        let delivered: u64 = log.iter().filter(|x| x.2).map(|x| x.1).sum();
        let whole = goodput_between(&r, SimTime::ZERO, r.end_time());
        prop_assert_eq!(whole, delivered as f64 / 1e6);
        let series = goodput(&r, SimDuration::from_millis(100)).unwrap();
        prop_assert_eq!(series.samples.len(), 10);
        prop_assert!(series.samples.windows(2).all(|w| w[0].x < w[1].x));
        let total: f64 = series.ys().map(|y| y * 0.1).sum();
        prop_assert!((total - whole).abs() < 1e-9);
        // overlapping logs may sum past 1; non-overlapping ones cannot
        let disjoint = r.channel_log.iter().enumerate().all(|(i, a)| {
            r.channel_log.iter().skip(i + 1).all(|b| !a.overlaps(b))
        });
        if disjoint {
            prop_assert!(series.ys().all(|y| (0.0..=1.0).contains(&y)));
        }
    }

    #[test]
    fn lost_packets_never_count_toward_delay(fates in proptest::collection::vec(0u8..3, 1..40)) {
        let mut r = shell(10);
        r.packets = fates
            .iter()
            .enumerate()
            .map(|(i, &f)| PacketRecord {
                node: NodeId(0),
                generated_at: SimTime(i as u64 * 10_000),
                finished_at: SimTime(i as u64 * 10_000 + 1_000 * (u64::from(f) + 1)),
                bytes: 180,
                fate: [PacketFate::Delivered, PacketFate::Collided, PacketFate::Dropped][f as usize],
                slot: None,
                after_convergence: false,
            })
            .collect();
        let d = average_delay(&r, SimDuration::from_millis(100)).unwrap();
        let delivered = fates.iter().filter(|&&f| f == 0).count();
        match d.overall_ms {
            None => prop_assert_eq!(delivered, 0),
            // every delivered packet took exactly 1 ms
            Some(m) => prop_assert!((m - 1.0).abs() < 1e-12),
        }
        prop_assert!(d.series.ys().all(|y| y >= 0.0));
    }
}
