use proptest::prelude::*;
use urllc_core::sim::{compute_metrics, run, sample_block_maxima, ArrivalProcess, Estimator};
use urllc_core::{Policy, SimConfig};

fn busy(policy: Policy, estimator: Estimator) -> SimConfig {
    let mut cfg = SimConfig {
        pairs: 6,
        horizon_slots: 3_000,
        arrival_process: ArrivalProcess::Packets,
        arrival_mean_bits: 2_000.0,
        record_traces: true,
        ..SimConfig::default()
    };
    cfg.control.policy = policy;
    cfg.control.q0_bits = 2_500.0;
    cfg.fl.period_slots = 250;
    cfg.fl.estimator = estimator;
    cfg
}

#[test]
fn recorded_trace_reproduces_the_metrics() {
    let cfg = busy(Policy::Proposed, Estimator::Federated);
    let out = run(&cfg).unwrap();
    let mut from_rows = compute_metrics(&out.rows, &cfg).unwrap();
    from_rows.samples_per_pair = out.metrics.samples_per_pair.clone();
    from_rows.comms = out.metrics.comms;
    from_rows.raw_sample_messages = out.metrics.raw_sample_messages;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
    let m = &out.metrics;
    assert!(close(m.avg_power_w, from_rows.avg_power_w));
    assert!(close(m.mean_queue_bits, from_rows.mean_queue_bits));
    assert_eq!(m.outage_prob, from_rows.outage_prob);
    assert_eq!(m.vues_exceeding_q0, from_rows.vues_exceeding_q0);

    // a reordered trace gives the same report
    let mut reversed = out.rows.clone();
    reversed.reverse();
    let again = compute_metrics(&reversed, &cfg).unwrap();
    assert_eq!(again.outage_prob, from_rows.outage_prob);
    assert!(close(again.avg_power_w, from_rows.avg_power_w));
}

#[test]
fn buffers_are_the_block_maxima_of_the_queue_trace() {
    let cfg = busy(Policy::Baseline2, Estimator::Federated);
    let out = run(&cfg).unwrap();
    let unit = cfg.fl.excess_unit_bits;
    let mut total = 0;
    for u in 0..cfg.pairs {
        let trace: Vec<f64> = out
            .rows
            .iter()
            .filter(|r| r.pair == u)
            .map(|r| r.q_bits)
            .collect();
        let want = sample_block_maxima(&trace, cfg.block_len_w as usize, cfg.control.q0_bits);
        let got: Vec<f64> = out.samples[u].iter().map(|s| s.value() * unit).collect();
        assert_eq!(want.len(), got.len());
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
        total += got.len();
    }
    assert!(total > 0, "configuration should produce exceedances");
}

#[test]
fn federated_runs_never_move_raw_samples() {
    for policy in Policy::ALL {
        let out = run(&busy(policy, Estimator::Federated)).unwrap();
        assert_eq!(out.metrics.raw_sample_messages, 0);
        assert_eq!(out.metrics.comms.raw_sample_messages, 0);
    }
    let cen = run(&busy(Policy::Proposed, Estimator::Centralized)).unwrap();
    assert!(cen.metrics.raw_sample_messages > 0);
}

#[test]
fn fixed_power_ignores_the_tail_model() {
    let a = run(&busy(Policy::FixedPower, Estimator::Federated)).unwrap();
    let b = run(&busy(Policy::FixedPower, Estimator::Centralized)).unwrap();
    assert_eq!(a.rows, b.rows);
}

#[test]
fn seeds_change_the_run() {
    let cfg = busy(Policy::Proposed, Estimator::Federated);
    let other = SimConfig {
        seed: 1,
        ..cfg.clone()
    };
    assert_ne!(run(&cfg).unwrap().rows, run(&other).unwrap().rows);
}

fn maxima_oracle(trace: &[f64], w: usize, q0: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for block in trace.chunks(w) {
        if block.len() < w {
            break;
        }
        let m = block
            .iter()
            .map(|&q| if q > q0 { q - q0 } else { 0.0 })
            .fold(0.0, f64::max);
        if m > 0.0 {
            out.push(m);
        }
    }
    out
}

proptest! {
    #[test]
    fn block_maxima_match_oracle(
        trace in prop::collection::vec(0.0f64..100.0, 0..200),
        w in 1usize..20,
        q0 in 0.0f64..100.0,
    ) {
        let got = sample_block_maxima(&trace, w, q0);
        prop_assert_eq!(got.len(), maxima_oracle(&trace, w, q0).len());
        prop_assert_eq!(got, maxima_oracle(&trace, w, q0));
        prop_assert!(sample_block_maxima(&trace, w, q0).len() <= trace.len() / w);
    }
}
