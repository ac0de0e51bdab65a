//! Candles, validated candle series, and fixed-length windows.

use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Bars per observation window.
pub const WINDOW_LEN: usize = 12;

/// Default bar period: four hours.
pub const FOUR_HOURS_SECS: i64 = 4 * 60 * 60;

/// Pip scale: one pip is 0.00001 price units.
pub const PIPS_PER_UNIT: i64 = 100_000;

/// A price or price distance in integer pips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pips(pub i64);

impl Pips {
    /// Parses a decimal price such as `1.16920` into pips.
    ///
    /// At most five fractional digits are accepted (trailing zeros beyond the
    /// fifth are tolerated). Returns `None` for anything else.
    pub fn parse_decimal(s: &str) -> Option<Pips> {
        let s = s.trim();
        let (neg, body) = match s.as_bytes().first()? {
            b'-' => (true, &s[1..]),
            b'+' => (false, &s[1..]),
            _ => (false, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let (kept, extra) = frac_part.split_at(frac_part.len().min(5));
        if extra.bytes().any(|b| b != b'0') {
            return None;
        }
        let mut value: i64 = 0;
        for b in int_part.bytes() {
            value = value.checked_mul(10)?.checked_add(i64::from(b - b'0'))?;
        }
        let mut frac: i64 = 0;
        for i in 0..5 {
            let digit = kept.as_bytes().get(i).map_or(0, |b| i64::from(b - b'0'));
            frac = frac * 10 + digit;
        }
        let total = value.checked_mul(PIPS_PER_UNIT)?.checked_add(frac)?;
        Some(Pips(if neg { -total } else { total }))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

/// Formats as a decimal price with five fractional digits.
impl fmt::Display for Pips {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let unit = PIPS_PER_UNIT as u64;
        write!(f, "{sign}{}.{:05}", abs / unit, abs % unit)
    }
}

/// One OHLC bar. `timestamp` is seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candle {
    pub timestamp: i64,
    pub open: Pips,
    pub high: Pips,
    pub low: Pips,
    pub close: Pips,
}

impl Candle {
    /// Builds a candle, checking the OHLC invariants.
    pub fn new(timestamp: i64, open: Pips, high: Pips, low: Pips, close: Pips) -> Result<Self> {
        let candle = Candle { timestamp, open, high, low, close };
        candle.check(0)?;
        Ok(candle)
    }

    fn check(&self, index: usize) -> Result<()> {
        let invalid = |reason| Err(Error::InvalidCandle { index, reason });
        if self.open.0 <= 0 || self.high.0 <= 0 || self.low.0 <= 0 || self.close.0 <= 0 {
            return invalid("prices must be positive");
        }
        if self.low > self.high {
            return invalid("low above high");
        }
        if self.low > self.open.min(self.close) {
            return invalid("low above open/close");
        }
        if self.high < self.open.max(self.close) {
            return invalid("high below open/close");
        }
        Ok(())
    }

    /// Price channel by index in (open, high, low, close) order.
    pub fn channel(&self, channel: usize) -> Pips {
        match channel {
            0 => self.open,
            1 => self.high,
            2 => self.low,
            _ => self.close,
        }
    }
}

/// How [`CandleSeries::new`] treats bars spaced wider than the bar period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapPolicy {
    #[default]
    Reject,
    /// Treat the series as contiguous regardless of spacing.
    Allow,
}

/// An ordered, validated run of candles with a fixed bar period.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CandleSeries {
    candles: Vec<Candle>,
    bar_period_secs: i64,
}

impl CandleSeries {
    pub fn new(candles: Vec<Candle>, bar_period_secs: i64, gaps: GapPolicy) -> Result<Self> {
        if bar_period_secs <= 0 {
            return Err(Error::InvalidConfig("bar period must be positive".into()));
        }
        for (index, candle) in candles.iter().enumerate() {
            candle.check(index)?;
            if index == 0 {
                continue;
            }
            let delta = candle.timestamp - candles[index - 1].timestamp;
            if delta <= 0 {
                return Err(Error::NonMonotonic { index });
            }
            if delta != bar_period_secs && gaps == GapPolicy::Reject {
                return Err(Error::Gap { index, gap_secs: delta, period_secs: bar_period_secs });
            }
        }
        Ok(CandleSeries { candles, bar_period_secs })
    }

    pub fn candles(&self) -> &[Candle] {
        &self.candles
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn bar_period_secs(&self) -> i64 {
        self.bar_period_secs
    }

    pub fn closes(&self) -> impl Iterator<Item = Pips> + '_ {
        self.candles.iter().map(|c| c.close)
    }

    /// Bars with `start <= timestamp < end`, as a new series.
    pub fn between(&self, start: i64, end: i64) -> CandleSeries {
        let candles = self.candles.iter().filter(|c| c.timestamp >= start && c.timestamp < end).copied().collect();
        CandleSeries { candles, bar_period_secs: self.bar_period_secs }
    }

    /// The window of [`WINDOW_LEN`] bars ending at (and including) `end`.
    pub fn window_ending_at(&self, end: usize) -> Result<CandleWindow<'_>> {
        if end + 1 < WINDOW_LEN || end >= self.len() {
            return Err(Error::CursorOutOfRange { cursor: end, len: self.len(), first: WINDOW_LEN - 1 });
        }
        Ok(CandleWindow { candles: &self.candles[end + 1 - WINDOW_LEN..=end] })
    }

    /// Windows ending at indices 11, 11 + stride, ...
    pub fn sliding_windows(&self, stride: usize) -> Result<impl ExactSizeIterator<Item = CandleWindow<'_>> + '_> {
        if stride == 0 {
            return Err(Error::ZeroStride);
        }
        if self.len() < WINDOW_LEN {
            return Err(Error::SeriesTooShort { len: self.len(), needed: WINDOW_LEN });
        }
        let count = (self.len() - WINDOW_LEN) / stride + 1;
        Ok((0..count).map(move |i| CandleWindow { candles: &self.candles[i * stride..i * stride + WINDOW_LEN] }))
    }
}

/// Exactly [`WINDOW_LEN`] contiguous candles borrowed from a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandleWindow<'a> {
    candles: &'a [Candle],
}

impl<'a> CandleWindow<'a> {
    pub fn new(candles: &'a [Candle]) -> Result<Self> {
        if candles.len() != WINDOW_LEN {
            return Err(Error::Shape {
                expected: alloc::format!("{WINDOW_LEN} candles"),
                got: alloc::format!("{}", candles.len()),
            });
        }
        Ok(CandleWindow { candles })
    }

    pub fn candles(&self) -> &'a [Candle] {
        self.candles
    }

    /// One OHLC channel as floats (pip units).
    pub fn channel(&self, channel: usize) -> [f64; WINDOW_LEN] {
        let mut out = [0.0; WINDOW_LEN];
        for (o, c) in out.iter_mut().zip(self.candles) {
            *o = c.channel(channel).as_f64();
        }
        out
    }
}
