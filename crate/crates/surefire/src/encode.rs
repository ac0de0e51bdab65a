//! Heatmap and tensor dumps of a single GAF observation.

use std::path::{Path, PathBuf};

use surefire_core::gaf::{render_heatmap, GafState, CHANNELS, CHANNEL_NAMES, STATE_LEN};
use surefire_core::WINDOW_LEN;

use crate::error::AppError;

pub const TENSOR_CSV: &str = "gaf.csv";

pub fn heatmap_name(channel: usize) -> String {
    format!("gaf_{}.ppm", CHANNEL_NAMES[channel])
}

/// Writes `gaf_<channel>.ppm` for each channel plus `gaf.csv`; returns the paths.
pub fn write_encoding(state: &GafState, zoom: usize, dir: &Path) -> Result<Vec<PathBuf>, AppError> {
    std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    let mut written = Vec::with_capacity(CHANNELS + 1);
    for ch in 0..CHANNELS {
        let image = render_heatmap(state, ch, zoom).map_err(AppError::core("heatmap"))?;
        let path = dir.join(heatmap_name(ch));
        std::fs::write(&path, image).map_err(AppError::io(&path))?;
        written.push(path);
    }
    let path = dir.join(TENSOR_CSV);
    std::fs::write(&path, tensor_csv(state)).map_err(AppError::io(&path))?;
    written.push(path);
    Ok(written)
}

/// `row,col,open,high,low,close`, one line per cell, floats in shortest
/// round-trip form.
pub fn tensor_csv(state: &GafState) -> String {
    let mut out = String::from("row,col");
    for name in CHANNEL_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in 0..WINDOW_LEN {
        for c in 0..WINDOW_LEN {
            out.push_str(&format!("{r},{c}"));
            for ch in 0..CHANNELS {
                out.push_str(&format!(",{}", state.get(r, c, ch)));
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_tensor_csv(text: &str) -> Result<GafState, AppError> {
    let bad = |msg: String| AppError::Input(format!("{TENSOR_CSV}: {msg}"));
    let mut data = vec![f64::NAN; STATE_LEN];
    let mut seen = 0;
    let mut lines = text.lines();
    if lines.next() != Some("row,col,open,high,low,close") {
        return Err(bad("bad header".into()));
    }
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + CHANNELS {
            return Err(bad(format!("line {}: expected 6 fields", n + 2)));
        }
        let idx = |s: &str| s.parse::<usize>().ok().filter(|&v| v < WINDOW_LEN);
        let (Some(r), Some(c)) = (idx(fields[0]), idx(fields[1])) else {
            return Err(bad(format!("line {}: bad cell index", n + 2)));
        };
        for ch in 0..CHANNELS {
            let v: f64 = fields[2 + ch].parse().map_err(|_| bad(format!("line {}: bad value", n + 2)))?;
            data[(r * WINDOW_LEN + c) * CHANNELS + ch] = v;
        }
        seen += 1;
    }
    if seen != WINDOW_LEN * WINDOW_LEN {
        return Err(bad(format!("{seen} cells, expected {}", WINDOW_LEN * WINDOW_LEN)));
    }
    GafState::from_flat(data).map_err(AppError::core(TENSOR_CSV))
}
