mod common;

use common::{forced_loss_path, oracle_grid, random_walk, to_pips, worst_settled_loss};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surefire_core::grid::{simulate_grid, GridConfig};
use surefire_core::{Pips, Side};

const E: i64 = 113_000;

fn engine(closes: &[i64], cfg: GridConfig) -> (i128, usize, usize, bool) {
    let o = simulate_grid(&to_pips(closes), cfg).unwrap();
    (o.pnl_pips as i128, o.positions_filled, o.bars_elapsed, o.settled)
}

#[test]
fn three_transaction_path_nets_one_k() {
    for k in [20, 25, 30] {
        let buy_path = [E - k, E, E + k];
        let cfg = GridConfig::new(Pips(E), Side::Buy, k, 3).unwrap();
        assert_eq!(engine(&buy_path, cfg), (k as i128, 3, 3, true));
        let sell_path = [E + k, E, E - k];
        let cfg = GridConfig::new(Pips(E), Side::Sell, k, 3).unwrap();
        assert_eq!(engine(&sell_path, cfg), (k as i128, 3, 3, true));
    }
}

#[test]
fn forced_losses_follow_recurrence() {
    for first in [Side::Buy, Side::Sell] {
        for k in [20, 25, 30] {
            let mut previous: Option<i128> = None;
            for m in 1..=3 {
                let cfg = GridConfig::new(Pips(E), first, k, m).unwrap();
                let (pnl, positions, _, settled) = engine(&forced_loss_path(E, first, k, m), cfg);
                assert!(settled);
                assert_eq!(positions, m as usize + 1);
                let expected = -[5, 11, 23][m as usize - 1] * k as i128;
                assert_eq!(pnl, expected, "{first} k={k} m={m}");
                if let Some(prev) = previous {
                    assert_eq!(pnl, 2 * prev - k as i128);
                }
                previous = Some(pnl);
                // Nothing reachable is worse.
                assert_eq!(worst_settled_loss(E, first, k, m, 6), expected);
            }
        }
    }
}

#[test]
fn engine_matches_oracle_on_every_short_lattice_path() {
    let k = 20;
    let levels: Vec<i64> = (-3..=3).map(|i| E + i * k / 2).collect();
    let mut count = 0;
    for len in 1..=5u32 {
        for code in 0..levels.len().pow(len) {
            let mut c = code;
            let path: Vec<i64> = (0..len)
                .map(|_| {
                    let p = levels[c % levels.len()];
                    c /= levels.len();
                    p
                })
                .collect();
            for first in [Side::Buy, Side::Sell] {
                for m in 1..=3 {
                    let o = oracle_grid(E, first, k, Some(m), 2, &path);
                    let cfg = GridConfig::new(Pips(E), first, k, m).unwrap().with_base_units(2);
                    assert_eq!(engine(&path, cfg), (o.pnl, o.positions, o.bars, o.settled), "{path:?} {first} {m}");
                    count += 1;
                }
            }
        }
    }
    assert!(count > 10_000);
}

#[test]
fn unlimited_grids_always_net_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..2_000 {
        let k = [20, 25, 30][i % 3];
        let first = if i % 2 == 0 { Side::Buy } else { Side::Sell };
        let path = random_walk(&mut rng, E, 400, 15);
        let o = simulate_grid(&to_pips(&path), GridConfig::unlimited(Pips(E), first, k)).unwrap();
        let oracle = oracle_grid(E, first, k, None, 1, &path);
        assert_eq!(o.pnl_pips as i128, oracle.pnl);
        if o.settled {
            assert_eq!(o.pnl_pips, k);
        }
    }
}

proptest! {
    #[test]
    fn settled_unlimited_grid_nets_k_times_units(
        steps in prop::collection::vec(-40i64..=40, 1..200),
        k in prop::sample::select(vec![20i64, 25, 30]),
        buy in any::<bool>(),
        units in 1u64..=5,
    ) {
        let mut p = E;
        let path: Vec<i64> = steps.iter().map(|s| { p += s; p }).collect();
        let first = if buy { Side::Buy } else { Side::Sell };
        let o = simulate_grid(&to_pips(&path), GridConfig::unlimited(Pips(E), first, k).with_base_units(units)).unwrap();
        if o.settled {
            prop_assert_eq!(o.pnl_pips, k * units as i64);
        }
        prop_assert!(o.bars_elapsed <= path.len());
    }

    #[test]
    fn budgeted_grid_matches_oracle(
        steps in prop::collection::vec(-40i64..=40, 1..100),
        k in prop::sample::select(vec![20i64, 25, 30]),
        buy in any::<bool>(),
        m in 1u32..=3,
    ) {
        let mut p = E;
        let path: Vec<i64> = steps.iter().map(|s| { p += s; p }).collect();
        let first = if buy { Side::Buy } else { Side::Sell };
        let o = oracle_grid(E, first, k, Some(m), 1, &path);
        let cfg = GridConfig::new(Pips(E), first, k, m).unwrap();
        prop_assert_eq!(engine(&path, cfg), (o.pnl, o.positions, o.bars, o.settled));
        prop_assert!(o.positions <= m as usize + 1);
    }
}
