//! Episodic trading environment.
//!
//! Each step opens one grid at the current bar's close using the chosen
//! action, runs it over the following closes, and pays the grid's P&L
//! discounted by 10% per additional buy-in that actually filled. The next
//! decision is taken on the bar after settlement.

use alloc::vec::Vec;

use crate::gaf::{encode_window_with, GafState, Rescaling};
use crate::grid::{simulate_grid, GridConfig, Side, TradeOutcome};
use crate::market::{CandleSeries, WINDOW_LEN};
use crate::metrics::TradeLog;
use crate::{Error, Result};

pub const ACTION_COUNT: usize = 18;
pub const MAX_ADDITIONAL_CHOICES: [u32; 3] = [1, 2, 3];
pub const DIRECTION_CHOICES: [Side; 2] = [Side::Buy, Side::Sell];
pub const TAKE_PROFIT_CHOICES: [i64; 3] = [20, 25, 30];

/// First cursor with a full window behind it.
pub const FIRST_CURSOR: usize = WINDOW_LEN - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurefireAction {
    pub max_additional: u32,
    pub direction: Side,
    pub take_profit: i64,
}

impl SurefireAction {
    pub fn new(max_additional: u32, direction: Side, take_profit: i64) -> Result<Self> {
        let a = SurefireAction { max_additional, direction, take_profit };
        a.index()?;
        Ok(a)
    }

    /// `i_max * 6 + i_dir * 3 + i_tp`.
    pub fn index(&self) -> Result<usize> {
        let invalid = || Error::InvalidConfig(alloc::format!("action {self:?} outside the action space"));
        let i_max = MAX_ADDITIONAL_CHOICES.iter().position(|&m| m == self.max_additional).ok_or_else(invalid)?;
        let i_dir = DIRECTION_CHOICES.iter().position(|&d| d == self.direction).ok_or_else(invalid)?;
        let i_tp = TAKE_PROFIT_CHOICES.iter().position(|&t| t == self.take_profit).ok_or_else(invalid)?;
        Ok(i_max * 6 + i_dir * 3 + i_tp)
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if index >= ACTION_COUNT {
            return Err(Error::ActionIndex(index));
        }
        Ok(SurefireAction {
            max_additional: MAX_ADDITIONAL_CHOICES[index / 6],
            direction: DIRECTION_CHOICES[(index / 3) % 2],
            take_profit: TAKE_PROFIT_CHOICES[index % 3],
        })
    }

    pub fn all() -> impl Iterator<Item = SurefireAction> {
        (0..ACTION_COUNT).map(|i| Self::from_index(i).expect("index in range"))
    }
}

impl core::fmt::Display for SurefireAction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{},{},{}", self.max_additional, self.direction, self.take_profit)
    }
}

/// `1.0 - 0.1 * additional_fills`, computed as `(10 - n) / 10` so that the
/// result is the correctly rounded decimal.
pub fn discount(additional_fills: usize) -> f64 {
    (10 - additional_fills.min(10)) as f64 / 10.0
}

pub fn reward(outcome: &TradeOutcome) -> f64 {
    outcome.pnl_pips as f64 * discount(outcome.additional_fills())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeRecord {
    /// Bar index of the entry close.
    pub entry_index: usize,
    pub action: SurefireAction,
    pub outcome: TradeOutcome,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: GafState,
    pub reward: f64,
    pub done: bool,
    pub info: TradeOutcome,
}

#[derive(Debug, Clone)]
pub struct TradingEnv {
    series: CandleSeries,
    rescaling: Rescaling,
    base_units: u64,
    cursor: usize,
    done: bool,
    log: Vec<TradeRecord>,
}

impl TradingEnv {
    /// Needs at least one full window plus one bar to trade into.
    pub fn new(series: CandleSeries, rescaling: Rescaling) -> Result<Self> {
        if series.len() < WINDOW_LEN + 1 {
            return Err(Error::SeriesTooShort { len: series.len(), needed: WINDOW_LEN + 1 });
        }
        Ok(TradingEnv { series, rescaling, base_units: 1, cursor: FIRST_CURSOR, done: false, log: Vec::new() })
    }

    pub fn with_base_units(mut self, base_units: u64) -> Self {
        self.base_units = base_units;
        self
    }

    pub fn series(&self) -> &CandleSeries {
        &self.series
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn trade_log(&self) -> &[TradeRecord] {
        &self.log
    }

    /// Undiscounted P&L of every trade this episode, in order.
    pub fn pnl_log(&self) -> TradeLog {
        self.log.iter().map(|t| t.outcome.pnl_pips).collect()
    }

    /// GAF encoding of the 12 bars ending at the cursor.
    pub fn observation(&self) -> Result<GafState> {
        let end = self.cursor.min(self.series.len() - 1);
        encode_window_with(&self.series.window_ending_at(end)?, &self.rescaling)
    }

    pub fn reset(&mut self, start_cursor: usize) -> Result<GafState> {
        if start_cursor < FIRST_CURSOR || start_cursor + 1 >= self.series.len() {
            return Err(Error::CursorOutOfRange { cursor: start_cursor, len: self.series.len(), first: FIRST_CURSOR });
        }
        self.cursor = start_cursor;
        self.done = false;
        self.log.clear();
        self.observation()
    }

    pub fn step(&mut self, action: SurefireAction) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let candles = self.series.candles();
        let entry = candles[self.cursor].close;
        let config = GridConfig::new(entry, action.direction, action.take_profit, action.max_additional)?
            .with_base_units(self.base_units);
        let closes: Vec<_> = candles[self.cursor + 1..].iter().map(|c| c.close).collect();
        let outcome = simulate_grid(&closes, config)?;
        let reward = reward(&outcome);
        self.log.push(TradeRecord { entry_index: self.cursor, action, outcome, reward });
        self.cursor += outcome.bars_elapsed + 1;
        self.done = !outcome.settled || self.cursor + 2 > self.series.len();
        Ok(StepResult { observation: self.observation()?, reward, done: self.done, info: outcome })
    }
}
