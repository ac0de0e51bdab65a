use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surefire::data::load_csv_path;
use surefire::encode::read_tensor_csv;
use surefire_core::gaf::encode_window;
use surefire_core::market::GapPolicy;

const NOV_24: i64 = 1_543_017_600;
const BAR: i64 = 4 * 3600;

fn surefire(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surefire")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn price(pips: i64) -> String {
    format!("{}.{:05}", pips / 100_000, pips % 100_000)
}

fn csv_text(start: i64, closes: &[i64]) -> String {
    let mut s = String::from("timestamp,open,high,low,close\n");
    for (i, &c) in closes.iter().enumerate() {
        let ts = chrono::DateTime::from_timestamp(start + i as i64 * BAR, 0).unwrap();
        let open = if i == 0 { c } else { closes[i - 1] };
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            ts.format("%Y-%m-%dT%H:%M:%SZ"),
            price(open),
            price(open.max(c) + 3),
            price(open.min(c) - 3),
            price(c)
        ));
    }
    s
}

/// 13 days of bars from 2018-11-24, drifting upwards with a wobble.
fn market_closes() -> Vec<i64> {
    (0..78).map(|i| 113_000 + 23 * i + [0, 9, -7, 4, -3, 11][i as usize % 6]).collect()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace { dir: tempfile::tempdir().unwrap() };
        ws.write("EURUSD_H4.csv", &csv_text(NOV_24, &market_closes()));
        ws.write(
            "run.json",
            r#"{
  "data": "EURUSD_H4.csv",
  "train_start": "2018-11-24",
  "train_end": "2018-11-30",
  "eval_start": "2018-12-01",
  "eval_end": "2018-12-06",
  "episodes": 2,
  "seed": 3
}"#,
        );
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) {
        std::fs::write(self.path(name), text).unwrap();
    }

    fn run(&self, args: &[&str]) -> Output {
        surefire(self.dir.path(), args)
    }
}

#[test]
fn validate_reports_bars_and_range() {
    let ws = Workspace::new();
    let o = ws.run(&["validate", "--data", "EURUSD_H4.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("bars: 78"), "{out}");
    assert!(out.contains("first: 2018-11-24T00:00:00Z"));
    assert!(out.contains("gaps: 0"));
}

#[test]
fn gaps_fail_unless_allowed() {
    let ws = Workspace::new();
    let mut text = csv_text(NOV_24, &market_closes()[..10]);
    text.push_str(&csv_text(NOV_24 + 12 * BAR, &market_closes()[12..20]).replacen(
        "timestamp,open,high,low,close\n",
        "",
        1,
    ));
    ws.write("gappy.csv", &text);
    let o = ws.run(&["validate", "--data", "gappy.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 12"), "{}", stderr(&o));
    let o = ws.run(&["validate", "--data", "gappy.csv", "--allow-gaps"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("gaps: 1"));
}

#[test]
fn missing_and_malformed_files() {
    let ws = Workspace::new();
    let o = ws.run(&["validate", "--data", "absent.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.csv"));
    ws.write("bad.csv", "timestamp,open,high,low,close\n2018-11-24T00:00:00Z,1.1,1.0,1.2,1.1\n");
    let o = ws.run(&["validate", "--data", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let ws = Workspace::new();
    for args in [
        &["frobnicate"][..],
        &["train", "--data", "EURUSD_H4.csv"],
        &["train", "--config", "run.json", "--agent", "sarsa"],
        &["validate"],
    ] {
        let o = ws.run(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    ws.write("overlap.json", r#"{"seed": 1, "train_end": "2018-12-05"}"#);
    let o = ws.run(&["train", "--config", "overlap.json", "--data", "EURUSD_H4.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eval range"));
    assert!(ws.run(&["--help"]).status.success());
}

#[test]
fn encode_writes_heatmaps_and_tensor() {
    let ws = Workspace::new();
    ws.write("short.csv", &csv_text(NOV_24, &market_closes()[..12]));
    let o = ws.run(&["encode", "--data", "short.csv", "--index", "11", "--out", "enc"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names = ["gaf_open.ppm", "gaf_high.ppm", "gaf_low.ppm", "gaf_close.ppm", "gaf.csv"];
    for n in names {
        assert!(ws.path("enc").join(n).is_file(), "{n}");
    }
    let ppm = std::fs::read(ws.path("enc/gaf_close.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n192 192\n255\n"));
    assert_eq!(ppm.len(), b"P6\n192 192\n255\n".len() + 192 * 192 * 3);

    let series = load_csv_path(&ws.path("short.csv"), GapPolicy::Reject).unwrap();
    let expected = encode_window(&series.window_ending_at(11).unwrap()).unwrap();
    let back = read_tensor_csv(&std::fs::read_to_string(ws.path("enc/gaf.csv")).unwrap()).unwrap();
    for (a, b) in back.as_slice().iter().zip(expected.as_slice()) {
        assert!((a - b).abs() <= 1e-12);
    }

    let o = ws.run(&["encode", "--data", "short.csv", "--index", "12"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn constant_prices_render_blue() {
    let ws = Workspace::new();
    ws.write("flat.csv", &csv_text(NOV_24, &[113_000; 12]).replace("1.13003", "1.13000").replace("1.12997", "1.13000"));
    let o = ws.run(&["encode", "--data", "flat.csv", "--index", "11", "--zoom", "2", "--out", "flat"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for ch in ["open", "high", "low", "close"] {
        let ppm = std::fs::read(ws.path(&format!("flat/gaf_{ch}.ppm"))).unwrap();
        let pixels = &ppm[b"P6\n24 24\n255\n".len()..];
        assert!(pixels.chunks(3).all(|p| p == [0, 0, 255]));
    }
}

#[test]
fn train_is_byte_reproducible() {
    let ws = Workspace::new();
    for agent in ["dqn", "ppo"] {
        let a = ws.run(&["train", "--config", "run.json", "--agent", agent, "--out", "a"]);
        let b = ws.run(&["train", "--config", "run.json", "--agent", agent, "--out", "b"]);
        assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
        for f in ["history.csv", "params.bin"] {
            let (x, y) = (std::fs::read(ws.path("a").join(f)).unwrap(), std::fs::read(ws.path("b").join(f)).unwrap());
            assert_eq!(x, y, "{agent} {f}");
        }
        let history = std::fs::read_to_string(ws.path("a/history.csv")).unwrap();
        let mut lines = history.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# config_hash=") && header.ends_with(" seed=3"), "{header}");
        assert_eq!(lines.next(), Some("episode,cumulative_reward"));
        assert_eq!(lines.count(), 2);
    }
}

#[test]
fn evaluate_is_deterministic_and_checks_architecture() {
    let ws = Workspace::new();
    assert!(ws.run(&["train", "--config", "run.json", "--out", "dqn"]).status.success());
    let first = ws.run(&["evaluate", "--config", "run.json", "--out", "dqn"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let report = std::fs::read(ws.path("dqn/report_DEU.json")).unwrap();
    let second = ws.run(&["evaluate", "--config", "run.json", "--out", "dqn"]);
    assert_eq!(stdout(&first), stdout(&second));
    assert_eq!(report, std::fs::read(ws.path("dqn/report_DEU.json")).unwrap());

    let o = ws.run(&["evaluate", "--config", "run.json", "--agent", "ppo", "--params", "dqn/params.bin"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("architecture mismatch"), "{}", stderr(&o));
}

#[test]
fn constant_agent_on_rising_closes_takes_k_per_trade() {
    let ws = Workspace::new();
    let rising: Vec<i64> = (0..78).map(|i| 113_000 + 25 * i).collect();
    ws.write("EURUSD_H4.csv", &csv_text(NOV_24, &rising));
    ws.write(
        "constant.json",
        r#"{"data": "EURUSD_H4.csv", "train_start": "2018-11-24", "train_end": "2018-11-30",
        "eval_start": "2018-12-01", "eval_end": "2018-12-06", "agent": "constant",
        "constant_max_additional": 1, "constant_direction": "BUY", "constant_take_profit": 20, "seed": 0}"#,
    );
    let o = ws.run(&["evaluate", "--config", "constant.json", "--out", "c"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = surefire::report::ReportFile::load(&ws.path("c/report_CEU.json")).unwrap();
    assert_eq!(file.constant_action.as_deref(), Some("1,BUY,20"));
    assert!(file.report.trades > 5);
    assert_eq!(file.report.net_profit, 20 * file.report.trades as i64);
    let o = ws.run(&["backtest", "--config", "constant.json", "--range", "eval"]);
    let trades: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("2018-")).map(String::from).collect();
    assert_eq!(trades.len(), file.report.trades);
    assert!(trades.iter().all(|t| t.contains(",20,0,1,true,20")), "{trades:?}");
}

#[test]
fn empty_eval_range_is_a_data_error() {
    let ws = Workspace::new();
    let o = ws.run(&["evaluate", "--config", "run.json", "--agent", "constant", "--data", "EURUSD_H4.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    ws.write(
        "late.json",
        r#"{"data": "EURUSD_H4.csv", "agent": "constant", "seed": 0, "train_start": "2018-11-24",
        "train_end": "2018-11-30", "eval_start": "2019-01-01", "eval_end": "2019-01-31"}"#,
    );
    let o = ws.run(&["evaluate", "--config", "late.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eval range"));
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

#[test]
fn report_matches_golden_files() {
    let ws = Workspace::new();
    let inputs: Vec<String> =
        ["ceu.json", "deu.json", "peu.json", "pau.json"].iter().map(|n| golden(n).display().to_string()).collect();
    let mut args = vec!["report", "--out", "merged"];
    args.extend(inputs.iter().map(String::as_str));
    let o = ws.run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(golden("report.txt")).unwrap();
    assert_eq!(stdout(&o), table);
    assert_eq!(std::fs::read_to_string(ws.path("merged/report.txt")).unwrap(), table);
    assert_eq!(
        std::fs::read_to_string(ws.path("merged/report.csv")).unwrap(),
        std::fs::read_to_string(golden("report.csv")).unwrap()
    );
}
