//! The Sure-Fire martingale grid.
//!
//! A grid opens one position at the entry price with a take-profit `k` pips
//! away and a stop-loss `2k` pips the other way. A backhand limit order for
//! three units waits `k` pips against the entry. Each fill arms the next
//! backhand limit at the opposite level with the next ladder size
//! (1, 3, 6, 12, ... units), until the buy-in budget runs out. The first close
//! on or beyond either boundary settles every position at that boundary.
//!
//! Only closes trigger fills or settlement. Prices are integer pips, so all
//! P&L figures are exact.

use alloc::vec::Vec;

use crate::market::Pips;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    /// +1 for long, -1 for short.
    pub fn sign(self) -> i64 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }
}

impl core::fmt::Display for Side {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Side::Buy => "BUY",
            Side::Sell => "SELL",
        })
    }
}

impl core::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("buy") {
            Ok(Side::Buy)
        } else if s.eq_ignore_ascii_case("sell") {
            Ok(Side::Sell)
        } else {
            Err(Error::InvalidConfig(alloc::format!("unknown side {s:?}")))
        }
    }
}

/// Units of the `n`-th filled position (0 = entry), per base unit.
pub fn ladder_units(n: usize) -> Option<u64> {
    if n == 0 {
        return Some(1);
    }
    let shift = u32::try_from(n - 1).ok().filter(|&s| s < 62)?;
    Some(3u64 << shift)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    pub entry: Pips,
    pub first: Side,
    /// Take-profit distance `k` in pips; the stop-loss sits at `2k`.
    pub take_profit: i64,
    /// Cap on fills after the entry. `None` lets the ladder grow without bound.
    pub max_additional: Option<u32>,
    pub base_units: u64,
}

impl GridConfig {
    pub fn new(entry: Pips, first: Side, take_profit: i64, max_additional: u32) -> Result<Self> {
        let config = GridConfig { entry, first, take_profit, max_additional: Some(max_additional), base_units: 1 };
        config.validate()?;
        Ok(config)
    }

    /// A grid that keeps laddering until a boundary exit. Not a tradable
    /// configuration; used to check the ladder arithmetic.
    pub fn unlimited(entry: Pips, first: Side, take_profit: i64) -> Self {
        GridConfig { entry, first, take_profit, max_additional: None, base_units: 1 }
    }

    pub fn with_base_units(mut self, base_units: u64) -> Self {
        self.base_units = base_units;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.take_profit <= 0 {
            return Err(Error::InvalidConfig("take-profit must be positive".into()));
        }
        if self.base_units == 0 {
            return Err(Error::InvalidConfig("base units must be positive".into()));
        }
        if let Some(m) = self.max_additional {
            if !(1..=3).contains(&m) {
                return Err(Error::InvalidConfig("max additional buy-ins must be 1, 2 or 3".into()));
            }
        }
        Ok(())
    }

    /// `(lower, upper)` settlement boundaries.
    pub fn bounds(&self) -> (Pips, Pips) {
        let e = self.entry.0;
        let k = self.take_profit;
        match self.first {
            Side::Buy => (Pips(e - 2 * k), Pips(e + k)),
            Side::Sell => (Pips(e - k), Pips(e + 2 * k)),
        }
    }

    /// Price level of the `n`-th position (0 = entry).
    fn level(&self, n: usize) -> Pips {
        if n.is_multiple_of(2) {
            self.entry
        } else {
            Pips(self.entry.0 - self.first.sign() * self.take_profit)
        }
    }

    fn side(&self, n: usize) -> Side {
        if n.is_multiple_of(2) {
            self.first
        } else {
            self.first.opposite()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub side: Side,
    pub units: u64,
    pub entry: Pips,
}

impl Position {
    fn pnl_at(&self, price: Pips) -> i128 {
        i128::from(self.side.sign()) * i128::from(self.units) * i128::from(price.0 - self.entry.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingLimit {
    pub side: Side,
    pub units: u64,
    pub level: Pips,
}

impl PendingLimit {
    fn crossed_by(&self, close: Pips) -> bool {
        match self.side {
            Side::Sell => close <= self.level,
            Side::Buy => close >= self.level,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridEvent {
    NoChange,
    LimitFilled,
    Settled(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridState {
    config: GridConfig,
    filled: Vec<Position>,
    pending: Option<PendingLimit>,
    lower: Pips,
    upper: Pips,
    settled: Option<i64>,
}

/// Opens a grid: one position at the entry and the first backhand limit.
pub fn open_grid(config: GridConfig) -> Result<GridState> {
    config.validate()?;
    let (lower, upper) = config.bounds();
    let mut grid = GridState { config, filled: Vec::new(), pending: None, lower, upper, settled: None };
    grid.fill_next()?;
    Ok(grid)
}

impl GridState {
    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn filled(&self) -> &[Position] {
        &self.filled
    }

    pub fn pending(&self) -> Option<&PendingLimit> {
        self.pending.as_ref()
    }

    pub fn lower_bound(&self) -> Pips {
        self.lower
    }

    pub fn upper_bound(&self) -> Pips {
        self.upper
    }

    pub fn settled(&self) -> Option<i64> {
        self.settled
    }

    pub fn additional_fills(&self) -> usize {
        self.filled.len() - 1
    }

    fn ladder_position(&self, n: usize) -> Result<(Side, u64, Pips)> {
        let units = ladder_units(n)
            .and_then(|u| u.checked_mul(self.config.base_units))
            .ok_or(Error::LadderOverflow { positions: n })?;
        Ok((self.config.side(n), units, self.config.level(n)))
    }

    /// Fills the next ladder position and arms the one after it if the budget allows.
    fn fill_next(&mut self) -> Result<()> {
        let n = self.filled.len();
        let (side, units, entry) = self.ladder_position(n)?;
        self.filled.push(Position { side, units, entry });
        let budget_left = self.config.max_additional.is_none_or(|m| n < m as usize);
        self.pending = if budget_left {
            let (side, units, level) = self.ladder_position(n + 1)?;
            Some(PendingLimit { side, units, level })
        } else {
            None
        };
        Ok(())
    }

    /// Net P&L of all filled positions valued at `price`.
    pub fn mark_to_market(&self, price: Pips) -> Result<i64> {
        let total: i128 = self.filled.iter().map(|p| p.pnl_at(price)).sum();
        i64::try_from(total).map_err(|_| Error::LadderOverflow { positions: self.filled.len() })
    }

    /// Feeds one close. A crossed limit fills first; then a close on or
    /// beyond a boundary settles everything at that boundary.
    pub fn step_close(&mut self, close: Pips) -> Result<GridEvent> {
        if self.settled.is_some() {
            return Err(Error::GridSettled);
        }
        let mut event = GridEvent::NoChange;
        if self.pending.is_some_and(|p| p.crossed_by(close)) {
            self.fill_next()?;
            event = GridEvent::LimitFilled;
        }
        let boundary = if close >= self.upper {
            Some(self.upper)
        } else if close <= self.lower {
            Some(self.lower)
        } else {
            None
        };
        if let Some(boundary) = boundary {
            let pnl = self.mark_to_market(boundary)?;
            self.settled = Some(pnl);
            self.pending = None;
            event = GridEvent::Settled(pnl);
        }
        Ok(event)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TradeOutcome {
    /// Net P&L in pips across all units.
    pub pnl_pips: i64,
    pub positions_filled: usize,
    /// Closes consumed after the entry bar.
    pub bars_elapsed: usize,
    /// False when the data ran out first; `pnl_pips` is then marked to the last close.
    pub settled: bool,
}

impl TradeOutcome {
    pub fn additional_fills(&self) -> usize {
        self.positions_filled.saturating_sub(1)
    }
}

/// Runs a grid over `closes` (bars after the entry bar) until it settles or the data ends.
pub fn simulate_grid(closes: &[Pips], config: GridConfig) -> Result<TradeOutcome> {
    let last = *closes.last().ok_or(Error::EmptyCloses)?;
    let mut grid = open_grid(config)?;
    for (i, &close) in closes.iter().enumerate() {
        if let GridEvent::Settled(pnl) = grid.step_close(close)? {
            return Ok(TradeOutcome {
                pnl_pips: pnl,
                positions_filled: grid.filled.len(),
                bars_elapsed: i + 1,
                settled: true,
            });
        }
    }
    Ok(TradeOutcome {
        pnl_pips: grid.mark_to_market(last)?,
        positions_filled: grid.filled.len(),
        bars_elapsed: closes.len(),
        settled: false,
    })
}
