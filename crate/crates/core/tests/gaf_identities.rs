mod common;

use common::{oracle_gasf_algebraic, oracle_gasf_trig, oracle_rescale};
use proptest::prelude::*;
use surefire_core::gaf::{encode_window, gasf, rescale, CHANNELS};
use surefire_core::market::{CandleSeries, GapPolicy, FOUR_HOURS_SECS};
use surefire_core::{Candle, Pips, WINDOW_LEN};

fn window_values() -> impl Strategy<Value = [f64; WINDOW_LEN]> {
    prop::array::uniform12(100_000.0f64..140_000.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gasf_identities(values in window_values()) {
        let x = rescale(&values).unwrap();
        let g = gasf(&x);
        let expected_x = oracle_rescale(&values);
        let trig = oracle_gasf_trig(&expected_x);
        let alg = oracle_gasf_algebraic(&expected_x);
        for i in 0..WINDOW_LEN {
            prop_assert!((x.values()[i] - expected_x[i]).abs() <= 1e-12);
            prop_assert!((g[i][i] - (2.0 * expected_x[i] * expected_x[i] - 1.0)).abs() <= 1e-12);
            for j in 0..WINDOW_LEN {
                prop_assert!((-1.0..=1.0).contains(&g[i][j]));
                prop_assert!((g[i][j] - g[j][i]).abs() <= 1e-12);
                prop_assert!((g[i][j] - trig[i][j]).abs() <= 1e-12);
                prop_assert!((g[i][j] - alg[i][j]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn constant_window_is_all_minus_one() {
    let candles: Vec<Candle> = (0..WINDOW_LEN as i64)
        .map(|i| Candle::new(i * FOUR_HOURS_SECS, Pips(110_000), Pips(110_000), Pips(110_000), Pips(110_000)).unwrap())
        .collect();
    let series = CandleSeries::new(candles, FOUR_HOURS_SECS, GapPolicy::Reject).unwrap();
    let state = encode_window(&series.window_ending_at(WINDOW_LEN - 1).unwrap()).unwrap();
    assert_eq!(state.shape(), [WINDOW_LEN, WINDOW_LEN, CHANNELS]);
    assert!(state.as_slice().iter().all(|&v| v == -1.0));
}
