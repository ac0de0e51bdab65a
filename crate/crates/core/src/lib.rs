//! Core of the Sure-Fire forex reinforcement-learning stack.
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std` (an allocator is required). File formats, CSV ingestion,
//! and the command-line front end live in the `surefire` crate.
//!
//! Module map:
//!
//! - [`market`]: candles, validated series, 12-bar windows
//! - [`gaf`]: Gramian angular summation field encoding and heatmap rendering
//! - [`grid`]: the martingale grid execution engine
//! - [`env`]: episodic trading environment over a candle series
//! - [`nn`]: tensors, layers, a small CNN with manual backprop, Adam
//! - [`agents`]: constant, DQN, and PPO agents plus the training loop
//! - [`metrics`]: net profit, profit factor, max drawdown, SQN

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod agents;
pub mod env;
mod error;
pub mod gaf;
pub mod grid;
pub mod market;
pub mod metrics;
pub mod nn;

pub use error::{Error, Result};
pub use grid::Side;
pub use market::{Candle, CandleSeries, CandleWindow, Pips, WINDOW_LEN};
