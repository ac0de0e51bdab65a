use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("candle {index}: {reason}")]
    InvalidCandle { index: usize, reason: &'static str },
    #[error("candle {index}: timestamp not strictly after the previous bar")]
    NonMonotonic { index: usize },
    #[error("candle {index}: gap of {gap_secs}s after previous bar (expected {period_secs}s)")]
    Gap { index: usize, gap_secs: i64, period_secs: i64 },
    #[error("series has {len} bars, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("stride must be positive")]
    ZeroStride,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("grid already settled")]
    GridSettled,
    #[error("close sequence is empty")]
    EmptyCloses,
    #[error("unit ladder overflow after {positions} positions")]
    LadderOverflow { positions: usize },
    #[error("cursor {cursor} out of range (series length {len}, first valid {first})")]
    CursorOutOfRange { cursor: usize, len: usize, first: usize },
    #[error("episode is finished; call reset")]
    EpisodeDone,
    #[error("action index {0} out of range 0..18")]
    ActionIndex(usize),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("trade log is empty")]
    EmptyLog,
    #[error("need at least {needed} trades, got {got}")]
    TooFewTrades { needed: usize, got: usize },
    #[error("equity reached {equity} pips at trade {index}")]
    Bankrupt { index: usize, equity: i64 },
    #[error("batch is empty")]
    EmptyBatch,
}

impl Error {
    /// True for failures of the numeric machinery (as opposed to bad input data).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::LadderOverflow { .. })
    }
}
