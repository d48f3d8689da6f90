use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use urllc_core::mobility::{
    assign_zones, place_pairs, step_mobility, Axis, MobilityConfig, ZoneLayout,
};
use urllc_core::radio::{path_loss_clamped, rate};
use urllc_core::{GridSpec, LinkClass, LinkGain, RadioConfig};

fn gain(per_rb: Vec<f64>) -> LinkGain {
    LinkGain { per_rb }
}

#[test]
fn default_radio_constants_validate() {
    RadioConfig::default().validate().unwrap();
    let bad = RadioConfig {
        ell_prime_db: -40.0,
        ..RadioConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn lanes_stay_on_their_centreline() {
    let grid = GridSpec::default();
    let mob = MobilityConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pairs = place_pairs(&grid, &mob, 40, &mut rng);
    let mut rngs: Vec<ChaCha8Rng> = (0..40).map(ChaCha8Rng::seed_from_u64).collect();
    for _ in 0..5000 {
        step_mobility(&mut pairs, &mut rngs, &grid, &mob, 0.01);
        for p in &pairs {
            let pos = p.tx_pos(&grid);
            let off = grid.lane_offset(&p.lane);
            let perp = match p.lane.axis {
                Axis::Horizontal => pos.y,
                Axis::Vertical => pos.x,
            };
            assert!((perp - off).abs() < 1e-9);
            assert!((0.0..grid.side_m).contains(&pos.x) && (0.0..grid.side_m).contains(&pos.y));
        }
    }
}

#[test]
fn mobility_is_reproducible() {
    let grid = GridSpec::default();
    let mob = MobilityConfig::default();
    let run = || {
        let mut pairs = place_pairs(&grid, &mob, 12, &mut ChaCha8Rng::seed_from_u64(1));
        let mut rngs: Vec<ChaCha8Rng> = (0..12)
            .map(|i| ChaCha8Rng::seed_from_u64(100 + i))
            .collect();
        for _ in 0..2000 {
            step_mobility(&mut pairs, &mut rngs, &grid, &mob, 0.05);
        }
        pairs
    };
    assert_eq!(run(), run());
}

#[test]
fn adjacent_zones_use_disjoint_resource_blocks() {
    let grid = GridSpec::default();
    let pairs = place_pairs(
        &grid,
        &MobilityConfig::default(),
        30,
        &mut ChaCha8Rng::seed_from_u64(0),
    );
    let pos: Vec<_> = pairs.iter().map(|p| p.tx_pos(&grid)).collect();
    for (cell_m, reuse, total) in [(125.0, 2, 60), (50.0, 2, 60), (62.5, 4, 60)] {
        let layout = ZoneLayout {
            cell_m,
            reuse,
            total_rbs: total,
        };
        let zones = assign_zones(&pos, &grid, &layout).unwrap();
        assert!(zones.adjacent_cells_disjoint(), "{layout:?}");
        assert_eq!(zones.zone_of.len(), pos.len());
        for set in &zones.rb_sets {
            assert_eq!(set.len(), total / reuse);
        }
    }
}

proptest! {
    #[test]
    fn rate_grows_with_power(
        g in prop::collection::vec(1e-12f64..1e-6, 3),
        p in prop::collection::vec(0.0f64..1.0, 3),
        extra in 1e-6f64..1.0,
        rb in 0usize..3,
    ) {
        let cfg = RadioConfig::default();
        let i = vec![1e-13; 3];
        let base = rate(&gain(g.clone()), &p, &i, &cfg).unwrap();
        let mut more = p.clone();
        more[rb] += extra;
        prop_assert!(rate(&gain(g), &more, &i, &cfg).unwrap() >= base);
    }

    #[test]
    fn rate_falls_with_interference(
        g in prop::collection::vec(1e-12f64..1e-6, 3),
        p in prop::collection::vec(0.0f64..1.0, 3),
        i in prop::collection::vec(0.0f64..1e-9, 3),
        extra in 1e-15f64..1e-9,
    ) {
        let cfg = RadioConfig::default();
        let base = rate(&gain(g.clone()), &p, &i, &cfg).unwrap();
        let louder: Vec<f64> = i.iter().map(|x| x + extra).collect();
        prop_assert!(rate(&gain(g), &p, &louder, &cfg).unwrap() <= base);
    }

    #[test]
    fn path_loss_is_symmetric(dx in -300.0f64..300.0, dy in -300.0f64..300.0) {
        let cfg = RadioConfig::default();
        for class in [LinkClass::Los, LinkClass::Wlos, LinkClass::Nlos] {
            let a = path_loss_clamped(dx, dy, class, &cfg);
            let b = path_loss_clamped(-dx, -dy, class, &cfg);
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0 && a.is_finite());
        }
    }
}
