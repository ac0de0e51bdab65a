//! File formats, CSV ingestion, and the command-line front end around
//! `surefire-core`.

pub mod cli;
pub mod config;
pub mod data;
pub mod encode;
pub mod error;
pub mod history;
pub mod params;
pub mod report;

pub use error::AppError;
