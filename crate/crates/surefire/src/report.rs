//! Performance tables: one row per model, pips for profit, percent for drawdown.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use surefire_core::agents::AgentKind;
use surefire_core::metrics::{PerformanceReport, ProfitFactor};

use crate::error::AppError;

pub const COLUMNS: [&str; 6] = ["Model Code", "Net Profit", "Profit Factor", "Max Draw-down", "SQN", "Trades"];

/// Agent letter followed by the first letter of each currency in the pair:
/// DQN on `EUR/USD` is `DEU`.
pub fn model_code(agent: &AgentKind, currency: &str) -> String {
    let mut code = String::from(agent.code_letter());
    code.extend(
        currency
            .split(|c: char| !c.is_ascii_alphabetic())
            .filter(|part| !part.is_empty())
            .flat_map(|part| {
                // "EURUSD" without a separator still yields two initials.
                if part.len() == 6 {
                    vec![&part[..1], &part[3..4]]
                } else {
                    vec![&part[..1]]
                }
            })
            .map(|s| s.to_ascii_uppercase()),
    );
    code
}

/// A report as written by `evaluate` and read back by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub config_hash: String,
    pub seed: u64,
    pub agent: String,
    pub currency: String,
    pub eval_start: String,
    pub eval_end: String,
    /// `max_additional,direction,take_profit` for the constant agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_action: Option<String>,
    pub report: PerformanceReport,
}

impl ReportFile {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
        serde_json::from_str(&text).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), AppError> {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(AppError::io(path))
    }
}

fn profit_factor_text(pf: ProfitFactor) -> String {
    match pf {
        ProfitFactor::Finite(v) => format!("{v:.2}"),
        ProfitFactor::Infinite => "inf".into(),
        ProfitFactor::Undefined => "n/a".into(),
    }
}

fn sqn_text(sqn: Option<f64>) -> String {
    sqn.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

fn cells(r: &PerformanceReport) -> [String; 6] {
    [
        r.model_code.clone(),
        r.net_profit.to_string(),
        profit_factor_text(r.profit_factor),
        format!("{:.2}%", r.max_drawdown),
        sqn_text(r.sqn),
        r.trades.to_string(),
    ]
}

/// Pipe-separated table; the model code is left-aligned, numbers right-aligned.
pub fn render_table(reports: &[PerformanceReport]) -> String {
    let rows: Vec<[String; 6]> = reports.iter().map(cells).collect();
    let mut widths = COLUMNS.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: [&str; 6], numeric: bool| {
        cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if numeric && i > 0 { format!("{c:>w$}") } else { format!("{c:<w$}") })
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = line(COLUMNS, false);
    out.push('\n');
    out.push_str(&widths.map(|w| "-".repeat(w)).join("-|-"));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row.each_ref().map(String::as_str), true));
        out.push('\n');
    }
    out
}

/// Same rows as CSV with unrounded values.
pub fn write_csv<W: Write>(reports: &[PerformanceReport], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model_code", "net_profit", "profit_factor", "max_drawdown_pct", "sqn", "trades"])?;
    for r in reports {
        let pf = match r.profit_factor {
            ProfitFactor::Finite(v) => v.to_string(),
            ProfitFactor::Infinite => "inf".into(),
            ProfitFactor::Undefined => String::new(),
        };
        w.write_record([
            r.model_code.clone(),
            r.net_profit.to_string(),
            pf,
            r.max_drawdown.to_string(),
            r.sqn.map(|v| v.to_string()).unwrap_or_default(),
            r.trades.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
