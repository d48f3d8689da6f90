use proptest::prelude::*;
use urllc_core::control::{alpha_coeff, update_queue, update_virtual_queues, water_filling};
use urllc_core::{ControlParams, Policy, QueueState};

fn objective(alpha: f64, gammas: &[f64], v: f64, p: &[f64]) -> f64 {
    gammas
        .iter()
        .zip(p)
        .map(|(&g, &x)| v * x - alpha * (g * x).ln_1p())
        .sum()
}

/// Largest normalized KKT violation.
fn kkt_residual(alpha: f64, gammas: &[f64], v: f64, p0: f64, p: &[f64], lambda: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let total: f64 = p.iter().sum();
    worst = worst.max((total - p0).max(0.0) / p0);
    worst = worst.max(lambda * (p0 - total).abs() / (p0 * (v + lambda).max(1e-300)));
    for (&g, &x) in gammas.iter().zip(p) {
        worst = worst.max((-x).max(0.0) / p0);
        let marginal = alpha * g / (1.0 + g * x);
        let scale = v + lambda + marginal;
        let r = if x > 0.0 {
            (v + lambda - marginal).abs()
        } else {
            (marginal - v - lambda).max(0.0)
        };
        worst = worst.max(r / scale);
    }
    worst
}

/// Shrinking-box grid search over the 3-RB feasible set.
fn grid_search(alpha: f64, gammas: &[f64; 3], v: f64, p0: f64) -> f64 {
    let n = 12;
    let mut centre = [p0 / 3.0; 3];
    let mut half = p0;
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let mut next = centre;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let at =
                        |c: f64, t: usize| (c - half + 2.0 * half * t as f64 / n as f64).max(0.0);
                    let p = [at(centre[0], i), at(centre[1], j), at(centre[2], k)];
                    if p.iter().sum::<f64>() > p0 {
                        continue;
                    }
                    let f = objective(alpha, gammas, v, &p);
                    if f < best {
                        best = f;
                        next = p;
                    }
                }
            }
        }
        centre = next;
        half *= 0.6;
    }
    best
}

fn instance(seed: u64) -> (f64, [f64; 3], f64, f64) {
    // small deterministic generator, independent of the crate's streams
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut u = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    let alpha = 10f64.powf(3.0 + 6.0 * u());
    let gammas = [
        10f64.powf(4.0 * u()),
        10f64.powf(4.0 * u()),
        10f64.powf(4.0 * u()),
    ];
    let v = 10f64.powf(2.0 + 8.0 * u());
    let p0 = 0.01 + 10.0 * u();
    (alpha, gammas, v, p0)
}

#[test]
fn water_filling_meets_kkt_and_beats_grid_search() {
    for seed in 0..100 {
        let (alpha, gammas, v, p0) = instance(seed);
        let d = water_filling(alpha, &gammas, v, p0).unwrap();
        let r = kkt_residual(alpha, &gammas, v, p0, &d.powers, d.lambda);
        assert!(r < 1e-8, "seed {seed}: residual {r:e}");
        let exact = objective(alpha, &gammas, v, &d.powers);
        let grid = grid_search(alpha, &gammas, v, p0);
        let scale = exact.abs().max(grid.abs()).max(1e-12);
        assert!(
            exact <= grid + 1e-9 * scale,
            "seed {seed}: {exact} > {grid}"
        );
        assert!(
            (grid - exact) / scale < 1e-3,
            "seed {seed}: {exact} vs {grid}"
        );
    }
}

#[test]
fn no_power_when_price_exceeds_best_marginal_gain() {
    let gammas = [3.0, 50.0, 7.0];
    let alpha = 10.0;
    let d = water_filling(alpha, &gammas, alpha * 50.0 * 1.0001, 1.0).unwrap();
    assert!(d.powers.iter().all(|&p| p == 0.0));
}

proptest! {
    #[test]
    fn kkt_holds_for_random_instances(
        alpha in 1e-3f64..1e9,
        gammas in prop::collection::vec(0.0f64..1e4, 1..8),
        v in 0.0f64..1e6,
        p0 in 1e-3f64..20.0,
    ) {
        let d = water_filling(alpha, &gammas, v, p0).unwrap();
        prop_assert!(d.powers.iter().all(|&p| p >= 0.0));
        prop_assert!(d.powers.iter().sum::<f64>() <= p0 * (1.0 + 1e-12));
        let active: Vec<usize> = (0..gammas.len()).filter(|&n| gammas[n] > 0.0).collect();
        let g: Vec<f64> = active.iter().map(|&n| gammas[n]).collect();
        let p: Vec<f64> = active.iter().map(|&n| d.powers[n]).collect();
        prop_assert!(kkt_residual(alpha, &g, v, p0, &p, d.lambda) < 1e-8);
    }

    #[test]
    fn total_power_grows_with_alpha(
        a in 1.0f64..1e8,
        factor in 1.0f64..100.0,
        gammas in prop::collection::vec(1e-2f64..1e4, 1..6),
        v in 1.0f64..1e6,
    ) {
        let lo: f64 = water_filling(a, &gammas, v, 5.0).unwrap().powers.iter().sum();
        let hi: f64 = water_filling(a * factor, &gammas, v, 5.0).unwrap().powers.iter().sum();
        prop_assert!(hi >= lo * (1.0 - 1e-12));
    }

    #[test]
    fn queues_stay_nonnegative(
        steps in prop::collection::vec((0.0f64..5e4, 0.0f64..5e4), 1..200),
        policy in prop::sample::select(Policy::ALL.to_vec()),
        mean in 0.0f64..1e4,
    ) {
        let params = ControlParams { policy, ..ControlParams::default() };
        let mut state = QueueState::default();
        for (arrivals, offered) in steps {
            let prev_q = state.q;
            let (q, served) = update_queue(state.q, arrivals, offered);
            prop_assert!(q >= 0.0 && served >= 0.0);
            prop_assert!((prev_q + arrivals - served - q).abs() <= 1e-9 * (prev_q + arrivals).max(1.0));
            state = update_virtual_queues(&state, q, &params, mean);
            prop_assert!(state.upsilon >= 0.0 && state.a_vq >= 0.0);
            let alpha = alpha_coeff(&state, &params, mean, 180e3);
            prop_assert!(alpha.is_finite());
        }
    }
}
