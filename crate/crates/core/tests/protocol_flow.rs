use std::f64::consts::PI;

use relbc::attacks::{run_delay_attack, run_early_measurement, run_parity_flip};
use relbc::channel::{builtin_channel, BuiltinChannel};
use relbc::coding::{block_error, BlockCode};
use relbc::protocol::{run_honest, run_transcripts, verify, AliceBehavior, FailureReason, ProtocolConfig, Simulator};
use relbc::states::{make_double_hump, WavepacketSpec};

fn config(kind: BuiltinChannel, n: usize, k: usize) -> ProtocolConfig {
    let spec = WavepacketSpec::new(1.0, 20.0, 5.0, 1e-3).unwrap();
    let f = make_double_hump(&spec, spec.default_grid(2.0 * spec.tau0).unwrap()).unwrap();
    let channel = builtin_channel(&kind, &spec, &f, 8.0).unwrap();
    ProtocolConfig::new(BlockCode::new(n, k).unwrap(), spec, channel).unwrap()
}

#[test]
fn honest_runs_are_sound_on_every_catalogue_channel() {
    let spec = WavepacketSpec::new(1.0, 20.0, 5.0, 1e-3).unwrap();
    for kind in BuiltinChannel::catalogue(&spec) {
        let c = config(kind.clone(), 4, 5);
        let (records, stats) = run_honest(&c, 1500, 21).unwrap();
        assert_eq!(records.len(), 1500);
        assert_eq!(stats.perp_outcomes, 0, "{}", kind.label());
        let p = stats.analytic_acceptance;
        let slack = 3.0 * (p * (1.0 - p) / 1500.0).sqrt() + 1e-12;
        assert!(stats.acceptance.rate() >= p - slack, "{}: {:?} vs {p}", kind.label(), stats.acceptance);
    }
}

#[test]
fn transcripts_verify_independently() {
    let c = config(BuiltinChannel::Rotate { theta: PI / 4.0, lambda: 0.8 }, 4, 7);
    let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
    for (t, r) in run_transcripts(&sim, 50, 8).unwrap() {
        let again = verify(&t, &t.announcement, &c).unwrap();
        assert_eq!(again, r);
        assert_eq!(r.accepted, r.reasons.is_empty());
        assert_eq!(t.outcomes.len(), 28);
        let last = t.log.last().unwrap();
        assert!(t.outcomes.iter().filter_map(|o| o.time_tag).all(|tag| tag <= last.tau));
    }
}

#[test]
fn binding_on_ideal_channel() {
    let c = config(BuiltinChannel::Ideal, 4, 3);
    let stats = run_parity_flip(&c, 2, 10_000, 31).unwrap();
    assert_eq!(stats.detected.hits, 10_000);
}

#[test]
fn flip_detection_on_noisy_channel() {
    let c = config(BuiltinChannel::Rotate { theta: 0.3, lambda: 0.8 }, 2, 16);
    let stats = run_parity_flip(&c, 0, 4000, 32).unwrap();
    let bound = 1.0 - block_error(0.1, 16).unwrap().exact;
    let slack = 3.0 * (bound * (1.0 - bound) / 4000.0).sqrt() + 1e-12;
    assert!(stats.detected.rate() >= bound - slack);
}

#[test]
fn delay_detection_grows_with_block_length() {
    let mut previous = 1.0;
    for k in [1, 5, 10] {
        let c = config(BuiltinChannel::Ideal, 2, k);
        let stats = run_delay_attack(&c, 20.0, 1, 5000, 41).unwrap();
        assert_eq!(stats.control_perp, 0);
        assert!(stats.undetected.rate() <= previous);
        previous = stats.undetected.rate();
        for r in stats.records.iter().filter(|r| !r.accepted) {
            assert!(r.reasons.contains(&FailureReason::PerpOutcome));
        }
    }
}

#[test]
fn early_measurement_learns_less_than_full_access() {
    let c = config(BuiltinChannel::Ideal, 4, 5);
    let early = run_early_measurement(&c, 5000, 51).unwrap();
    let (_, honest) = run_honest(&c, 5000, 51).unwrap();
    assert!(early.parity_success.rate() < honest.recovery.rate());
    assert_eq!(honest.recovery.rate(), 1.0);
}

#[test]
fn disclosure_time_is_configurable() {
    let mut c = config(BuiltinChannel::Ideal, 2, 2);
    c.disclose_at = Some(0.0);
    let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
    let (t, r) = sim.run(c.seeds).unwrap();
    assert!(r.accepted);
    let requested = t.log.iter().find(|e| e.event == relbc::protocol::LogEvent::DisclosureRequested).unwrap();
    assert_eq!(requested.tau, 0.0);
}
