//! Trade-log performance statistics.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Per-trade undiscounted P&L in pips, in execution order.
pub type TradeLog = Vec<i64>;

pub const DEFAULT_INITIAL_EQUITY: i64 = 10_000;

pub fn net_profit(log: &[i64]) -> i64 {
    log.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "value", rename_all = "snake_case"))]
pub enum ProfitFactor {
    Finite(f64),
    /// Winning trades and no losing ones.
    Infinite,
    /// Every trade was flat.
    Undefined,
}

impl ProfitFactor {
    pub fn value(&self) -> Option<f64> {
        match self {
            ProfitFactor::Finite(v) => Some(*v),
            ProfitFactor::Infinite => Some(f64::INFINITY),
            ProfitFactor::Undefined => None,
        }
    }
}

/// Gross profit over absolute gross loss.
pub fn profit_factor(log: &[i64]) -> Result<ProfitFactor> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let gross_profit: i64 = log.iter().filter(|&&p| p > 0).sum();
    let gross_loss: i64 = -log.iter().filter(|&&p| p < 0).sum::<i64>();
    Ok(match (gross_profit, gross_loss) {
        (0, 0) => ProfitFactor::Undefined,
        (_, 0) => ProfitFactor::Infinite,
        (p, l) => ProfitFactor::Finite(p as f64 / l as f64),
    })
}

/// Largest peak-to-trough decline of `initial_equity + cumulative pnl`,
/// as a non-positive percentage of the running peak.
pub fn max_drawdown(log: &[i64], initial_equity: i64) -> Result<f64> {
    if initial_equity <= 0 {
        return Err(Error::InvalidConfig("initial equity must be positive".into()));
    }
    let mut equity = initial_equity;
    let mut peak = initial_equity;
    let mut worst = 0.0f64;
    for (index, pnl) in log.iter().enumerate() {
        equity += pnl;
        if equity <= 0 {
            return Err(Error::Bankrupt { index, equity });
        }
        peak = peak.max(equity);
        worst = worst.min((equity - peak) as f64 / peak as f64);
    }
    Ok(100.0 * worst)
}

/// System quality number: `mean / sample_std * sqrt(n)`. `None` when the
/// standard deviation is zero.
pub fn sqn(log: &[i64]) -> Result<Option<f64>> {
    if log.len() < 2 {
        return Err(Error::TooFewTrades { needed: 2, got: log.len() });
    }
    let n = log.len() as f64;
    let mean = log.iter().map(|&p| p as f64).sum::<f64>() / n;
    let var = log
        .iter()
        .map(|&p| {
            let d = p as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / (n - 1.0);
    if var == 0.0 {
        return Ok(None);
    }
    Ok(Some(mean / libm::sqrt(var) * libm::sqrt(n)))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerformanceReport {
    pub model_code: String,
    pub net_profit: i64,
    pub profit_factor: ProfitFactor,
    /// Percent, never positive.
    pub max_drawdown: f64,
    pub sqn: Option<f64>,
    pub trades: usize,
}

impl PerformanceReport {
    /// Needs at least one trade. With a single trade SQN is reported as undefined.
    pub fn from_log(model_code: impl Into<String>, log: &[i64], initial_equity: i64) -> Result<Self> {
        let sqn = match sqn(log) {
            Ok(v) => v,
            Err(Error::TooFewTrades { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(PerformanceReport {
            model_code: model_code.into(),
            net_profit: net_profit(log),
            profit_factor: profit_factor(log)?,
            max_drawdown: max_drawdown(log, initial_equity)?,
            sqn,
            trades: log.len(),
        })
    }
}
