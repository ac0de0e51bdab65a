//! Subcommands. Each returns an [`AppError`] whose exit code the binary
//! passes through; normal output goes to the supplied writer.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use surefire_core::agents::{constant_policy, run_episode, train_with, AgentKind, TrainedAgent};
use surefire_core::env::TradingEnv;
use surefire_core::gaf::encode_window_with;
use surefire_core::metrics::PerformanceReport;
use surefire_core::{CandleSeries, Side, WINDOW_LEN};

use crate::config::{AgentName, Overrides, RunConfig};
use crate::data::{format_timestamp, gaps, load_csv_path};
use crate::encode::write_encoding;
use crate::error::AppError;
use crate::history::write_history;
use crate::params::{read_params, write_params};
use crate::report::{model_code, render_table, write_csv, ReportFile};

pub const PARAMS_FILE: &str = "params.bin";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Parser)]
#[command(name = "surefire", version, about = "Sure-Fire grid trading with GAF-encoded reinforcement learning")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Candle CSV (`timestamp,open,high,low,close`).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub agent: Option<AgentName>,
    /// Training episodes [default: 1300].
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    /// Output directory [default: current directory].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Pair label such as EUR/USD (otherwise taken from the data file name).
    #[arg(long, global = true)]
    pub currency: Option<String>,
    /// Accept timestamp gaps wider than one bar.
    #[arg(long, global = true)]
    pub allow_gaps: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Range {
    Train,
    Eval,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and check a candle file; print bar count, time range, and gaps.
    Validate,
    /// Write heatmaps and a tensor dump of the window ending at a bar.
    Encode {
        /// Index of the last bar of the window (0-based, at least 11).
        #[arg(long)]
        index: usize,
        #[arg(long, default_value_t = 16)]
        zoom: usize,
    },
    /// Run a fixed grid action over a date range and report every trade.
    Backtest {
        #[arg(long, value_enum, default_value_t = Range::All)]
        range: Range,
        #[arg(long)]
        max_additional: Option<u32>,
        #[arg(long)]
        direction: Option<Side>,
        #[arg(long)]
        take_profit: Option<i64>,
    },
    /// Train an agent on the train range; writes params.bin and history.csv.
    Train,
    /// One deterministic pass over the eval range; writes a JSON report.
    Evaluate {
        /// Parameter file [default: <out>/params.bin].
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Merge evaluation reports into one table.
    Report {
        /// Report files written by `evaluate`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), AppError> {
    let g = cli.global;
    let overrides = Overrides {
        data: g.data,
        currency: g.currency,
        seed: g.seed,
        agent: g.agent,
        episodes: g.episodes,
        out: g.out,
        allow_gaps: g.allow_gaps,
    };
    let config = RunConfig::resolve(g.config.as_deref(), overrides)?;
    let result = match cli.command {
        Command::Validate => validate(&config, out),
        Command::Encode { index, zoom } => encode(&config, index, zoom, out),
        Command::Backtest { range, max_additional, direction, take_profit } => {
            let mut config = config;
            config.constant_max_additional = max_additional.unwrap_or(config.constant_max_additional);
            config.constant_direction = direction.unwrap_or(config.constant_direction);
            config.constant_take_profit = take_profit.unwrap_or(config.constant_take_profit);
            backtest(&config, range, out)
        }
        Command::Train => train(&config, out),
        Command::Evaluate { params } => evaluate(&config, params.as_deref(), out),
        Command::Report { reports } => report(&config, &reports, out),
    };
    out.flush().map_err(AppError::io("<stdout>"))?;
    result
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<(), AppError> {
    out.write_fmt(text).map_err(AppError::io("<stdout>"))
}

fn load_series(config: &RunConfig) -> Result<CandleSeries, AppError> {
    load_csv_path(config.data_path()?, config.gap_policy())
}

fn slice(series: &CandleSeries, (start, end): (i64, i64), what: &str) -> Result<CandleSeries, AppError> {
    let part = series.between(start, end);
    if part.len() < WINDOW_LEN + 1 {
        return Err(AppError::Input(format!(
            "{what} range {}..{} has {} bars in the data, need at least {}",
            format_timestamp(start),
            format_timestamp(end),
            part.len(),
            WINDOW_LEN + 1
        )));
    }
    Ok(part)
}

fn make_env(config: &RunConfig, series: CandleSeries, train: &CandleSeries) -> Result<TradingEnv, AppError> {
    Ok(TradingEnv::new(series, config.rescaling_for(train))
        .map_err(AppError::core("environment"))?
        .with_base_units(config.base_units))
}

fn create(path: &Path) -> Result<BufWriter<File>, AppError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    }
    File::create(path).map(BufWriter::new).map_err(AppError::io(path))
}

pub fn validate(config: &RunConfig, out: &mut dyn Write) -> Result<(), AppError> {
    let series = load_series(config)?;
    let candles = series.candles();
    let found = gaps(&series);
    emit(out, format_args!("file: {}\n", config.data_path()?.display()))?;
    emit(out, format_args!("bars: {}\n", series.len()))?;
    emit(out, format_args!("first: {}\n", format_timestamp(candles[0].timestamp)))?;
    emit(out, format_args!("last: {}\n", format_timestamp(candles[candles.len() - 1].timestamp)))?;
    emit(out, format_args!("gaps: {}\n", found.len()))?;
    for (i, secs) in found {
        emit(out, format_args!("  gap of {}s before {}\n", secs, format_timestamp(candles[i].timestamp)))?;
    }
    Ok(())
}

pub fn encode(config: &RunConfig, index: usize, zoom: usize, out: &mut dyn Write) -> Result<(), AppError> {
    let series = load_series(config)?;
    let window = series.window_ending_at(index).map_err(|e| AppError::Input(format!("--index {index}: {e}")))?;
    let state = encode_window_with(&window, &config.rescaling_for(&series)).map_err(AppError::core("encode"))?;
    for path in write_encoding(&state, zoom, &config.out_dir())? {
        emit(out, format_args!("wrote {}\n", path.display()))?;
    }
    Ok(())
}

pub fn backtest(config: &RunConfig, range: Range, out: &mut dyn Write) -> Result<(), AppError> {
    let series = load_series(config)?;
    let train = slice(&series, config.train_bounds(), "train").unwrap_or_else(|_| series.clone());
    let part = match range {
        Range::Train => slice(&series, config.train_bounds(), "train")?,
        Range::Eval => slice(&series, config.eval_bounds(), "eval")?,
        Range::All => series.clone(),
    };
    let action = config.constant_action()?;
    let mut env = make_env(config, part, &train)?;
    let policy = constant_policy(action).map_err(AppError::core("backtest"))?;
    let summary = run_episode(&mut env, &policy).map_err(AppError::core("backtest"))?;
    emit(out, format_args!("action: {action}\n"))?;
    emit(out, format_args!("entry_time,pnl_pips,additional_fills,bars,settled,reward\n"))?;
    let candles = env.series().candles();
    for t in &summary.trades {
        emit(
            out,
            format_args!(
                "{},{},{},{},{},{}\n",
                format_timestamp(candles[t.entry_index].timestamp),
                t.outcome.pnl_pips,
                t.outcome.additional_fills(),
                t.outcome.bars_elapsed,
                t.outcome.settled,
                t.reward
            ),
        )?;
    }
    let log: Vec<i64> = summary.trades.iter().map(|t| t.outcome.pnl_pips).collect();
    let code = model_code(&AgentKind::Constant(action), &config.currency_label().unwrap_or_default());
    let report = PerformanceReport::from_log(code, &log, config.initial_equity).map_err(AppError::core("metrics"))?;
    emit(out, format_args!("\n{}", render_table(&[report])))
}

pub fn train(config: &RunConfig, out: &mut dyn Write) -> Result<(), AppError> {
    let train_config = config.train_config()?;
    let kind = config.agent_kind()?;
    let series = load_series(config)?;
    let part = slice(&series, config.train_bounds(), "train")?;
    let mut env = make_env(config, part.clone(), &part)?;
    let run = train_with(&mut env, &kind, &train_config, |_, _| {}).map_err(AppError::core("training"))?;

    let dir = config.out_dir();
    let hash = config.hash();
    let history_path = dir.join(HISTORY_FILE);
    write_history(create(&history_path)?, &run.history, &hex::encode(hash), run.seed)
        .map_err(AppError::io(&history_path))?;
    emit(out, format_args!("wrote {}\n", history_path.display()))?;
    if let Some(network) = run.agent.network() {
        let params_path = dir.join(PARAMS_FILE);
        write_params(create(&params_path)?, network, hash, run.seed).map_err(AppError::io(&params_path))?;
        emit(out, format_args!("wrote {}\n", params_path.display()))?;
    }
    let n = run.history.len();
    if n > 0 {
        let tail = &run.history[n.saturating_sub(20)..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        emit(out, format_args!("episodes: {n}, mean reward over the last {}: {mean:.2}\n", tail.len()))?;
    }
    Ok(())
}

/// Evaluates the configured agent over the eval range. Pure apart from
/// reading the parameter file, so it can be called repeatedly.
pub fn evaluate_report(config: &RunConfig, params: Option<&Path>) -> Result<ReportFile, AppError> {
    let seed = config.seed()?;
    let kind = config.agent_kind()?;
    let currency = config.currency_label()?;
    let series = load_series(config)?;
    let train = slice(&series, config.train_bounds(), "train")?;
    let eval = slice(&series, config.eval_bounds(), "eval")?;
    let agent = match (&kind, config.agent_architecture()) {
        (AgentKind::Constant(a), _) => TrainedAgent::Constant(constant_policy(*a).map_err(AppError::core("agent"))?),
        (_, Some(arch)) => {
            let path = params.map_or_else(|| config.out_dir().join(PARAMS_FILE), Path::to_path_buf);
            let file = File::open(&path).map_err(AppError::io(&path))?;
            let (header, network) = read_params(std::io::BufReader::new(file), &arch)
                .map_err(|source| AppError::Params { path: path.clone(), source })?;
            if header.config_hash != config.hash() {
                eprintln!(
                    "warning: {} was trained under config {}, evaluating with {}",
                    path.display(),
                    hex::encode(header.config_hash),
                    config.hash_hex()
                );
            }
            match kind {
                AgentKind::Ppo => TrainedAgent::Ppo(network),
                _ => TrainedAgent::Dqn(network),
            }
        }
        (_, None) => unreachable!("learning agents have an architecture"),
    };
    let mut env = make_env(config, eval, &train)?;
    let summary = run_episode(&mut env, &agent).map_err(AppError::core("evaluation"))?;
    let log: Vec<i64> = summary.trades.iter().map(|t| t.outcome.pnl_pips).collect();
    let code = model_code(&kind, &currency);
    let report = PerformanceReport::from_log(code, &log, config.initial_equity).map_err(AppError::core("metrics"))?;
    Ok(ReportFile {
        config_hash: config.hash_hex(),
        seed,
        agent: format!("{:?}", config.agent).to_lowercase(),
        currency,
        eval_start: config.eval_start.to_string(),
        eval_end: config.eval_end.to_string(),
        constant_action: match kind {
            AgentKind::Constant(a) => Some(a.to_string()),
            _ => None,
        },
        report,
    })
}

pub fn evaluate(config: &RunConfig, params: Option<&Path>, out: &mut dyn Write) -> Result<(), AppError> {
    let file = evaluate_report(config, params)?;
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir).map_err(AppError::io(&dir))?;
    let path = dir.join(format!("report_{}.json", file.report.model_code));
    file.save(&path)?;
    emit(out, format_args!("{}", render_table(std::slice::from_ref(&file.report))))?;
    emit(out, format_args!("wrote {}\n", path.display()))
}

/// Renders the reports in the order given. With `--out`, also writes
/// `report.txt` and `report.csv` there.
pub fn report(config: &RunConfig, inputs: &[PathBuf], out: &mut dyn Write) -> Result<(), AppError> {
    let files = inputs.iter().map(|p| ReportFile::load(p)).collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<PerformanceReport> = files.into_iter().map(|f| f.report).collect();
    let table = render_table(&reports);
    emit(out, format_args!("{table}"))?;
    if let Some(dir) = &config.out {
        let txt = dir.join("report.txt");
        create(&txt)?.write_all(table.as_bytes()).map_err(AppError::io(&txt))?;
        let csv_path = dir.join("report.csv");
        write_csv(&reports, create(&csv_path)?).map_err(|e| AppError::Input(format!("{}: {e}", csv_path.display())))?;
    }
    Ok(())
}
